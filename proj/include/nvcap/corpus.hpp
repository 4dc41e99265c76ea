// Corpus preparation: MSVD-style annotation parsing, pluggable translation
// with a persistent cache, per-video train/val/test splits, rare-token
// filtering, vocabulary construction and caption encode/decode.
#ifndef NVCAP_CORPUS_HPP
#define NVCAP_CORPUS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nvcap/common.hpp"
#include "nvcap/csv.hpp"

namespace nvcap {

enum class Split { unassigned, train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    default: return "unassigned";
  }
}

inline Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  if (name == "unassigned" || name.empty()) return Split::unassigned;
  fail(ErrorKind::config_error, "unknown split name: " + name);
}

struct CaptionRecord {
  std::string video_id;
  std::string english;
  std::string nepali;
  Split split = Split::unassigned;
};

constexpr int kMaxCaptionLen = 10;   // content budget per caption
constexpr int kSequenceLen = kMaxCaptionLen + 1;  // bos + content + eos + pads

// ---------------------------------------------------------------------------
// Tokenization: strip the Devanagari danda and ASCII .,!?;: then split on
// whitespace. Safe for Devanagari text since no multi-byte code unit can
// collide with the stripped ASCII bytes.
// ---------------------------------------------------------------------------
inline std::vector<std::string> tokenize_caption(const std::string& text) {
  static const std::string danda = "\xe0\xa5\xa4";  // U+0964
  std::string cleaned;
  cleaned.reserve(text.size());
  for (size_t i = 0; i < text.size();) {
    if (text.compare(i, danda.size(), danda) == 0) {
      cleaned.push_back(' ');
      i += danda.size();
      continue;
    }
    char c = text[i];
    switch (c) {
      case '.': case ',': case '!': case '?': case ';': case ':':
        cleaned.push_back(' ');
        break;
      case '\t': case '\r': case '\n':
        cleaned.push_back(' ');
        break;
      default:
        cleaned.push_back(c);
    }
    ++i;
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : cleaned) {
    if (c == ' ') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) add_token(s);
  }

  int add_token(const std::string& token) {
    auto it = token_to_index_.find(token);
    if (it != token_to_index_.end()) return it->second;
    int id = static_cast<int>(index_to_token_.size());
    token_to_index_.emplace(token, id);
    index_to_token_.push_back(token);
    return id;
  }

  int size() const { return static_cast<int>(index_to_token_.size()); }

  int index_of(const std::string& token) const {
    auto it = token_to_index_.find(token);
    return it == token_to_index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_index_.count(token) > 0;
  }

  const std::string& token_at(int id) const {
    if (id < 0 || id >= size())
      fail(ErrorKind::invalid_id, "token id " + std::to_string(id) +
                                      " out of range (vocab size " +
                                      std::to_string(size()) + ")");
    return index_to_token_[static_cast<size_t>(id)];
  }

  const std::vector<std::string>& tokens() const { return index_to_token_; }

  // Content hash used to refuse decoding with a checkpoint built on a
  // different vocabulary.
  std::string fingerprint() const {
    uint64_t h = fnv1a64("nvcap-vocab");
    for (const auto& t : index_to_token_) {
      h = fnv1a64(t.data(), t.size(), h);
      h = fnv1a64("\n", 1, h);
    }
    return to_hex(h);
  }

  std::string to_text() const {
    std::string out;
    for (const auto& t : index_to_token_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  static Vocabulary from_text(const std::string& text) {
    Vocabulary v;
    auto lines = split_lines(text);
    if (lines.size() < 4 || lines[0] != "<pad>" || lines[1] != "<bos>" ||
        lines[2] != "<eos>" || lines[3] != "<unk>")
      fail(ErrorKind::config_error, "vocabulary file missing special tokens");
    for (size_t i = 4; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      v.add_token(lines[i]);
    }
    return v;
  }

 private:
  std::unordered_map<std::string, int> token_to_index_;
  std::vector<std::string> index_to_token_;
};

struct TokenSequence {
  std::vector<int> ids;  // length kSequenceLen
  int raw_length = 0;    // count of non-pad ids
};

// ---------------------------------------------------------------------------
// Annotation parsing: one "<video_id> <caption>" per non-blank line.
// ---------------------------------------------------------------------------
inline std::vector<CaptionRecord> parse_annotations(const std::string& raw_text) {
  std::vector<CaptionRecord> records;
  auto lines = split_lines(raw_text);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (trim(line).empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos)
      fail(ErrorKind::malformed_line,
           "annotation line " + std::to_string(i + 1) + " has no space separator");
    CaptionRecord rec;
    rec.video_id = line.substr(0, sp);
    rec.english = line.substr(sp + 1);
    if (rec.video_id.empty())
      fail(ErrorKind::malformed_line,
           "annotation line " + std::to_string(i + 1) + " has empty video id");
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Translation client (pluggable) + persistent append-only cache keyed by a
// 64-bit hash of the English text.
// ---------------------------------------------------------------------------
class Translator {
 public:
  virtual ~Translator() = default;
  // Returns Nepali text; throws on client failure.
  virtual std::string translate(const std::string& english) = 0;
};

class FunctionTranslator : public Translator {
 public:
  explicit FunctionTranslator(std::function<std::string(const std::string&)> fn)
      : fn_(std::move(fn)) {}
  std::string translate(const std::string& english) override { return fn_(english); }

 private:
  std::function<std::string(const std::string&)> fn_;
};

// Offline map loaded from a TSV of "english<TAB>nepali" lines.
class TsvTranslator : public Translator {
 public:
  explicit TsvTranslator(const std::string& tsv_text) {
    for (const auto& line : split_lines(tsv_text)) {
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        fail(ErrorKind::malformed_line, "translation TSV line missing tab: " + line);
      map_.emplace(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  std::string translate(const std::string& english) override {
    auto it = map_.find(english);
    if (it == map_.end())
      fail(ErrorKind::translation_failed, "no offline translation for: " + english);
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::string> map_;
};

namespace detail {
inline std::string escape_cache_value(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else out.push_back(c);
  }
  return out;
}
inline std::string unescape_cache_value(const std::string& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      if (n == 'n') out.push_back('\n');
      else if (n == 't') out.push_back('\t');
      else out.push_back(n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}
}  // namespace detail

// Newline-delimited "<english-hash><TAB><nepali>" records, append-only.
class TranslationCache {
 public:
  TranslationCache() = default;

  // In-memory cache persisted at `path`; loads existing entries if present.
  explicit TranslationCache(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      for (const auto& line : split_lines(read_text_file(path_))) {
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
          fail(ErrorKind::corrupt_cache, "translation cache line missing tab");
        entries_[line.substr(0, tab)] = detail::unescape_cache_value(line.substr(tab + 1));
      }
    }
  }

  std::optional<std::string> lookup(const std::string& english) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(to_hex(fnv1a64(english)));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& english, const std::string& nepali) {
    const std::string key = to_hex(fnv1a64(english));
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, fresh] = entries_.emplace(key, nepali);
    (void)it;
    if (fresh && !path_.empty()) {
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) fail(ErrorKind::io_error, "cannot append to cache: " + path_.string());
      out << key << '\t' << detail::escape_cache_value(nepali) << '\n';
      out.flush();
    }
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
};

struct TranslateOptions {
  bool offline = false;     // never invoke the client; cache misses are errors
  int max_retries = 3;      // attempts per unique string before giving up
  int workers = 1;          // concurrent client requests
  int min_interval_ms = 0;  // request-rate cap across all workers
};

// Fills the nepali field of every record. Cache hits bypass the client; misses
// are fanned out over unique English strings and written back to the cache.
inline void translate_corpus(std::vector<CaptionRecord>& records, Translator& translator,
                             TranslationCache& cache, const TranslateOptions& options = {}) {
  // Unique untranslated strings, first-occurrence order.
  std::vector<std::string> pending;
  {
    std::unordered_set<std::string> seen;
    for (const auto& rec : records) {
      if (!rec.nepali.empty()) continue;
      if (cache.lookup(rec.english)) continue;
      if (seen.insert(rec.english).second) pending.push_back(rec.english);
    }
  }

  if (!pending.empty()) {
    if (options.offline) {
      // Report the first affected video id.
      for (const auto& rec : records) {
        if (rec.nepali.empty() && !cache.lookup(rec.english))
          fail(ErrorKind::missing_translation,
               "offline mode but no cached translation for video " + rec.video_id +
                   " (\"" + rec.english + "\")");
      }
    }

    std::atomic<size_t> next{0};
    std::mutex failure_mutex;
    std::optional<std::string> failed_english;
    std::mutex rate_mutex;
    auto last_request = std::chrono::steady_clock::now() -
                        std::chrono::milliseconds(options.min_interval_ms);

    auto worker = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (failed_english) return;
        }
        const std::string& english = pending[i];
        if (options.min_interval_ms > 0) {
          std::unique_lock<std::mutex> lock(rate_mutex);
          auto earliest = last_request + std::chrono::milliseconds(options.min_interval_ms);
          auto now = std::chrono::steady_clock::now();
          if (now < earliest) {
            std::this_thread::sleep_for(earliest - now);
          }
          last_request = std::chrono::steady_clock::now();
        }
        bool done = false;
        for (int attempt = 0; attempt < std::max(1, options.max_retries) && !done; ++attempt) {
          try {
            cache.insert(english, translator.translate(english));
            done = true;
          } catch (const std::exception&) {
            if (attempt + 1 >= std::max(1, options.max_retries)) {
              std::lock_guard<std::mutex> lock(failure_mutex);
              if (!failed_english) failed_english = english;
            }
          }
        }
      }
    };

    int n_workers = std::max(1, options.workers);
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<size_t>(n_workers));
      for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
      for (auto& th : threads) th.join();
    }

    if (failed_english) {
      std::string video = "?";
      for (const auto& rec : records)
        if (rec.english == *failed_english) { video = rec.video_id; break; }
      fail(ErrorKind::translation_failed,
           "translation failed after retries for video " + video);
    }
  }

  for (auto& rec : records) {
    if (!rec.nepali.empty()) continue;
    auto hit = cache.lookup(rec.english);
    if (!hit)
      fail(ErrorKind::missing_translation, "no translation for video " + rec.video_id);
    rec.nepali = *hit;
  }
}

// ---------------------------------------------------------------------------
// Split assignment: per unique video id, floor-based val/test counts with the
// remainder going to train. Deterministic for a fixed seed.
// ---------------------------------------------------------------------------
struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline void split_by_video(std::vector<CaptionRecord>& records,
                           const SplitRatios& ratios = {}, uint64_t seed = 0) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    fail(ErrorKind::invalid_argument, "split ratios must sum to 1");

  std::vector<std::string> ids;
  {
    std::set<std::string> unique;
    for (const auto& rec : records) unique.insert(rec.video_id);
    ids.assign(unique.begin(), unique.end());
  }
  if (ids.size() < 3)
    fail(ErrorKind::insufficient_data,
         "need at least 3 distinct videos, got " + std::to_string(ids.size()));

  Rng rng(seed);
  rng.shuffle(ids);

  const size_t n = ids.size();
  const size_t n_val = static_cast<size_t>(ratios.val * static_cast<double>(n));
  const size_t n_test = static_cast<size_t>(ratios.test * static_cast<double>(n));
  const size_t n_train = n - n_val - n_test;

  std::unordered_map<std::string, Split> assignment;
  for (size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    assignment.emplace(ids[i], s);
  }
  for (auto& rec : records) rec.split = assignment.at(rec.video_id);
}

// ---------------------------------------------------------------------------
// Rare-token filter over training captions. Dropping a caption lowers the
// counts of its other tokens, so the filter iterates until stable; the
// result is a fixpoint (applying it again changes nothing).
// ---------------------------------------------------------------------------
inline std::vector<CaptionRecord> filter_rare(const std::vector<CaptionRecord>& records,
                                              int min_frequency = 2) {
  std::vector<CaptionRecord> out = records;
  for (;;) {
    std::unordered_map<std::string, int> freq;
    for (const auto& rec : out) {
      if (rec.split != Split::train) continue;
      for (const auto& tok : tokenize_caption(rec.nepali)) ++freq[tok];
    }
    std::vector<CaptionRecord> kept;
    kept.reserve(out.size());
    bool dropped = false;
    for (const auto& rec : out) {
      bool keep = true;
      if (rec.split == Split::train) {
        for (const auto& tok : tokenize_caption(rec.nepali)) {
          if (freq[tok] < min_frequency) { keep = false; break; }
        }
      }
      if (keep) kept.push_back(rec);
      else dropped = true;
    }
    out = std::move(kept);
    if (!dropped) return out;
  }
}

// Vocabulary from training-split Nepali captions only, ordered by descending
// frequency then first occurrence, specials prepended.
inline Vocabulary build_vocab(const std::vector<CaptionRecord>& records) {
  std::unordered_map<std::string, int> freq;
  std::unordered_map<std::string, size_t> first_seen;
  std::vector<std::string> order;
  for (const auto& rec : records) {
    if (rec.split != Split::train) continue;
    for (const auto& tok : tokenize_caption(rec.nepali)) {
      auto [it, fresh] = freq.emplace(tok, 0);
      ++it->second;
      if (fresh) {
        first_seen.emplace(tok, order.size());
        order.push_back(tok);
      }
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    int fa = freq[a], fb = freq[b];
    if (fa != fb) return fa > fb;
    return first_seen[a] < first_seen[b];
  });
  Vocabulary vocab;
  for (const auto& tok : order) vocab.add_token(tok);
  return vocab;
}

// [bos, content (truncated to max_len-1, unknowns -> unk), eos, pads] with a
// fixed total length of max_len+1.
inline TokenSequence encode_caption(const std::string& text, const Vocabulary& vocab,
                                    int max_len = kMaxCaptionLen) {
  if (max_len < 2) fail(ErrorKind::invalid_argument, "max_len must be >= 2");
  auto tokens = tokenize_caption(text);
  const size_t budget = static_cast<size_t>(max_len - 1);
  if (tokens.size() > budget) tokens.resize(budget);

  TokenSequence seq;
  seq.ids.reserve(static_cast<size_t>(max_len + 1));
  seq.ids.push_back(Vocabulary::kBos);
  for (const auto& tok : tokens) seq.ids.push_back(vocab.index_of(tok));
  seq.ids.push_back(Vocabulary::kEos);
  seq.raw_length = static_cast<int>(seq.ids.size());
  seq.ids.resize(static_cast<size_t>(max_len + 1), Vocabulary::kPad);
  return seq;
}

inline std::string decode_ids(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab.size())
      fail(ErrorKind::invalid_id, "token id " + std::to_string(id) +
                                      " out of range (vocab size " +
                                      std::to_string(vocab.size()) + ")");
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token_at(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus CSV: header video_id,english,nepali,split (RFC-4180).
// ---------------------------------------------------------------------------
inline std::string corpus_to_csv(const std::vector<CaptionRecord>& records) {
  std::string out = "video_id,english,nepali,split\n";
  for (const auto& rec : records) {
    out += csv_join({rec.video_id, rec.english, rec.nepali, split_name(rec.split)});
    out += '\n';
  }
  return out;
}

inline std::vector<CaptionRecord> corpus_from_csv(const std::string& text) {
  auto rows = csv_parse(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"video_id", "english", "nepali", "split"})
    fail(ErrorKind::malformed_line, "corpus CSV must start with header video_id,english,nepali,split");
  std::vector<CaptionRecord> records;
  records.reserve(rows.size() - 1);
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;  // trailing blank line
    if (rows[i].size() != 4)
      fail(ErrorKind::malformed_line, "corpus CSV row " + std::to_string(i + 1) +
                                          " has " + std::to_string(rows[i].size()) + " fields");
    CaptionRecord rec;
    rec.video_id = rows[i][0];
    rec.english = rows[i][1];
    rec.nepali = rows[i][2];
    rec.split = split_from_name(rows[i][3]);
    if (rec.video_id.empty())
      fail(ErrorKind::malformed_line, "corpus CSV row " + std::to_string(i + 1) + " has empty video id");
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<CaptionRecord> records_of_split(const std::vector<CaptionRecord>& records,
                                                   Split split) {
  std::vector<CaptionRecord> out;
  for (const auto& rec : records)
    if (rec.split == split) out.push_back(rec);
  return out;
}

}  // namespace nvcap

#endif  // NVCAP_CORPUS_HPP
