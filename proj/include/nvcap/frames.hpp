// Frame sampling, per-frame feature extraction behind a pluggable backbone,
// and the binary on-disk feature cache.
#ifndef NVCAP_FRAMES_HPP
#define NVCAP_FRAMES_HPP

#include <Eigen/Core>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nvcap/common.hpp"
#include "nvcap/image.hpp"

namespace nvcap {

constexpr int kFramesPerVideo = 30;
constexpr int kFrameSize = 224;

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FrameStack {
  std::string video_id;
  std::vector<Image> frames;  // exactly kFramesPerVideo, each kFrameSize^2 RGB
};

struct FeatureTensor {
  std::string video_id;
  std::string backbone;
  MatrixF features;  // (kFramesPerVideo, dim)

  int dim() const { return static_cast<int>(features.cols()); }
};

// Evenly spaced, endpoint-inclusive rounded indices; repeats appear when the
// video is shorter than k frames.
inline std::vector<int> sample_frame_indices(int total_frames, int k = kFramesPerVideo) {
  if (total_frames < 1)
    fail(ErrorKind::empty_video, "cannot sample frames from an empty video");
  std::vector<int> indices(static_cast<size_t>(k));
  if (k == 1) {
    indices[0] = 0;
    return indices;
  }
  for (int i = 0; i < k; ++i) {
    double pos = static_cast<double>(i) * (total_frames - 1) / (k - 1);
    indices[static_cast<size_t>(i)] = static_cast<int>(std::lround(pos));
  }
  return indices;
}

inline FrameStack extract_frames(const FrameSource& source, const std::vector<int>& indices) {
  FrameStack stack;
  stack.video_id = source.id();
  stack.frames.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || static_cast<size_t>(idx) >= source.frame_count())
      fail(ErrorKind::decode_failed,
           "video " + source.id() + ": frame index " + std::to_string(idx) + " out of range");
    Image img = source.frame(static_cast<size_t>(idx));
    if (img.width == kFrameSize && img.height == kFrameSize)
      stack.frames.push_back(std::move(img));
    else
      stack.frames.push_back(resize_bilinear(img, kFrameSize, kFrameSize));
  }
  return stack;
}

// ---------------------------------------------------------------------------
// Backbones
// ---------------------------------------------------------------------------
struct Backbone {
  std::string name;
  int dim = 0;
  std::function<FeatureTensor(const FrameStack&)> apply;
};

inline const std::vector<std::pair<std::string, int>>& backbone_registry() {
  static const std::vector<std::pair<std::string, int>> table = {
      {"efficientnetb0", 1280},
      {"resnet101", 2048},
      {"vgg16", 4096},
      {"synthetic", 1280},   // default; configurable
      {"precomputed", 0},    // dim comes from the feature file
  };
  return table;
}

inline int backbone_dim(const std::string& name) {
  for (const auto& [n, d] : backbone_registry())
    if (n == name) return d;
  fail(ErrorKind::unknown_backbone, "unknown backbone: " + name);
}

namespace detail {
// Deterministic per-frame embedding: hash the raw frame bytes, then expand the
// hash into dim floats in [-1, 1). Row i depends on frame i only.
inline void synthetic_row(const Image& frame, float* out, int dim) {
  uint64_t h = fnv1a64(frame.rgb.data(), frame.rgb.size());
  Rng rng(h);
  for (int j = 0; j < dim; ++j)
    out[j] = static_cast<float>(rng.uniform(-1.0, 1.0));
}

inline std::string sanitize_key(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')
      out.push_back(c);
    else {
      static const char* hex = "0123456789abcdef";
      out.push_back('%');
      out.push_back(hex[(static_cast<unsigned char>(c) >> 4) & 0xf]);
      out.push_back(hex[static_cast<unsigned char>(c) & 0xf]);
    }
  }
  return out;
}
}  // namespace detail

inline std::filesystem::path feature_path(const std::filesystem::path& cache_dir,
                                          const std::string& video_id,
                                          const std::string& backbone) {
  return cache_dir / (detail::sanitize_key(video_id) + "." + detail::sanitize_key(backbone) + ".feat");
}

// Feature file: 12-byte magic "NVCAP-FEAT\0\0" + u32le version, u32le id
// length + bytes, u32le backbone length + bytes, u32le rows, u32le dim,
// then rows*dim little-endian float32, row-major.
namespace featfile {
constexpr char kMagic[12] = {'N', 'V', 'C', 'A', 'P', '-', 'F', 'E', 'A', 'T', 0, 0};
constexpr uint32_t kVersion = 1;

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline uint32_t get_u32(const std::string& b, size_t& off, const std::string& what) {
  if (off + 4 > b.size()) fail(ErrorKind::corrupt_cache, what + ": truncated header");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<uint8_t>(b[off + static_cast<size_t>(i)])) << (8 * i);
  off += 4;
  return v;
}
}  // namespace featfile

inline std::string encode_features(const FeatureTensor& tensor) {
  std::string out(featfile::kMagic, sizeof(featfile::kMagic));
  featfile::put_u32(out, featfile::kVersion);
  featfile::put_u32(out, static_cast<uint32_t>(tensor.video_id.size()));
  out += tensor.video_id;
  featfile::put_u32(out, static_cast<uint32_t>(tensor.backbone.size()));
  out += tensor.backbone;
  featfile::put_u32(out, static_cast<uint32_t>(tensor.features.rows()));
  featfile::put_u32(out, static_cast<uint32_t>(tensor.features.cols()));
  static_assert(sizeof(float) == 4);
  // floats are stored little-endian; this code targets little-endian hosts
  out.append(reinterpret_cast<const char*>(tensor.features.data()),
             static_cast<size_t>(tensor.features.size()) * sizeof(float));
  return out;
}

inline FeatureTensor decode_features(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), featfile::kMagic, sizeof(featfile::kMagic)) != 0)
    fail(ErrorKind::corrupt_cache, what + ": bad feature-file magic");
  size_t off = sizeof(featfile::kMagic);
  if (featfile::get_u32(bytes, off, what) != featfile::kVersion)
    fail(ErrorKind::corrupt_cache, what + ": unsupported feature-file version");
  FeatureTensor t;
  uint32_t id_len = featfile::get_u32(bytes, off, what);
  if (off + id_len > bytes.size()) fail(ErrorKind::corrupt_cache, what + ": truncated video id");
  t.video_id = bytes.substr(off, id_len);
  off += id_len;
  uint32_t bb_len = featfile::get_u32(bytes, off, what);
  if (off + bb_len > bytes.size()) fail(ErrorKind::corrupt_cache, what + ": truncated backbone name");
  t.backbone = bytes.substr(off, bb_len);
  off += bb_len;
  uint32_t rows = featfile::get_u32(bytes, off, what);
  uint32_t cols = featfile::get_u32(bytes, off, what);
  size_t payload = static_cast<size_t>(rows) * cols * sizeof(float);
  if (bytes.size() - off != payload)
    fail(ErrorKind::corrupt_cache, what + ": payload is " + std::to_string(bytes.size() - off) +
                                       " bytes but header declares " + std::to_string(payload));
  t.features.resize(rows, cols);
  std::memcpy(t.features.data(), bytes.data() + off, payload);
  return t;
}

inline std::filesystem::path save_features(const FeatureTensor& tensor,
                                           const std::filesystem::path& cache_dir) {
  std::filesystem::create_directories(cache_dir);
  auto path = feature_path(cache_dir, tensor.video_id, tensor.backbone);
  atomic_write_file(path, encode_features(tensor));
  return path;
}

inline FeatureTensor load_features(const std::string& video_id, const std::string& backbone,
                                   const std::filesystem::path& cache_dir) {
  auto path = feature_path(cache_dir, video_id, backbone);
  if (!std::filesystem::exists(path))
    fail(ErrorKind::cache_miss, "no cached features for (" + video_id + ", " + backbone + ")");
  FeatureTensor t = decode_features(read_text_file(path), path.string());
  if (t.video_id != video_id || t.backbone != backbone)
    fail(ErrorKind::corrupt_cache, path.string() + ": header key mismatch");
  return t;
}

struct BackboneOptions {
  int synthetic_dim = 1280;
  std::filesystem::path feature_dir;  // for precomputed and real-CNN names
};

// Build a backbone by registry name. The synthetic backbone computes features
// in-process; the real-CNN names and "precomputed" read features that were
// produced out-of-process (see tools/extract_cnn_features.py) from the
// feature directory.
inline Backbone make_backbone(const std::string& name, const BackboneOptions& options = {}) {
  Backbone b;
  b.name = name;
  if (name == "synthetic") {
    b.dim = options.synthetic_dim > 0 ? options.synthetic_dim : 1280;
    int dim = b.dim;
    b.apply = [name, dim](const FrameStack& stack) {
      FeatureTensor t;
      t.video_id = stack.video_id;
      t.backbone = name;
      t.features.resize(static_cast<long>(stack.frames.size()), dim);
      for (size_t i = 0; i < stack.frames.size(); ++i)
        detail::synthetic_row(stack.frames[i], t.features.row(static_cast<long>(i)).data(), dim);
      return t;
    };
    return b;
  }
  b.dim = backbone_dim(name);  // throws unknown-backbone
  std::filesystem::path dir = options.feature_dir;
  int declared = b.dim;
  b.apply = [name, dir, declared](const FrameStack& stack) {
    if (dir.empty())
      fail(ErrorKind::missing_feature,
           "backbone " + name + " serves precomputed features; set a feature directory");
    FeatureTensor t = load_features(stack.video_id, name, dir);
    if (declared > 0 && t.dim() != declared)
      fail(ErrorKind::corrupt_cache, "backbone " + name + " declares dim " +
                                         std::to_string(declared) + " but cache has " +
                                         std::to_string(t.dim()));
    return t;
  };
  return b;
}

inline FeatureTensor extract_features(const FrameStack& stack, const Backbone& backbone) {
  if (!backbone.apply)
    fail(ErrorKind::unknown_backbone, "backbone " + backbone.name + " has no apply function");
  FeatureTensor t = backbone.apply(stack);
  if (t.features.rows() != static_cast<long>(stack.frames.size()) ||
      (backbone.dim > 0 && t.dim() != backbone.dim))
    fail(ErrorKind::shape_mismatch,
         "backbone " + backbone.name + " returned shape (" + std::to_string(t.features.rows()) +
             ", " + std::to_string(t.features.cols()) + ")");
  if (!t.features.allFinite())
    fail(ErrorKind::shape_mismatch, "backbone " + backbone.name + " returned non-finite values");
  return t;
}

// ---------------------------------------------------------------------------
// Feature store: what datagen/eval read from. The directory store loads
// tensors lazily, one video at a time.
// ---------------------------------------------------------------------------
class FeatureStore {
 public:
  virtual ~FeatureStore() = default;
  virtual bool has(const std::string& video_id) const = 0;
  virtual FeatureTensor load(const std::string& video_id) const = 0;
};

class DirFeatureStore : public FeatureStore {
 public:
  DirFeatureStore(std::filesystem::path dir, std::string backbone)
      : dir_(std::move(dir)), backbone_(std::move(backbone)) {}
  bool has(const std::string& video_id) const override {
    return std::filesystem::exists(feature_path(dir_, video_id, backbone_));
  }
  FeatureTensor load(const std::string& video_id) const override {
    return load_features(video_id, backbone_, dir_);
  }
  const std::string& backbone() const { return backbone_; }

 private:
  std::filesystem::path dir_;
  std::string backbone_;
};

class MemoryFeatureStore : public FeatureStore {
 public:
  void put(FeatureTensor tensor) { tensors_[tensor.video_id] = std::move(tensor); }
  bool has(const std::string& video_id) const override { return tensors_.count(video_id) > 0; }
  FeatureTensor load(const std::string& video_id) const override {
    auto it = tensors_.find(video_id);
    if (it == tensors_.end())
      fail(ErrorKind::cache_miss, "no features for video " + video_id);
    return it->second;
  }

 private:
  std::map<std::string, FeatureTensor> tensors_;
};

}  // namespace nvcap

#endif  // NVCAP_FRAMES_HPP
