// 8-bit RGB images, bilinear resize, binary PPM io and frame sources.
#ifndef NVCAP_IMAGE_HPP
#define NVCAP_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "nvcap/common.hpp"

namespace nvcap {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  static Image solid(int width, int height, uint8_t r, uint8_t g, uint8_t b) {
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.resize(static_cast<size_t>(width) * static_cast<size_t>(height) * 3);
    for (size_t i = 0; i < img.rgb.size(); i += 3) {
      img.rgb[i] = r;
      img.rgb[i + 1] = g;
      img.rgb[i + 2] = b;
    }
    return img;
  }

  uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<size_t>(y) * static_cast<size_t>(width) +
                static_cast<size_t>(x)) * 3 + static_cast<size_t>(c)];
  }
};

// Bilinear resize with pixel-center mapping; an identity-size resize
// reproduces the input bytes exactly.
inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
  if (src.width <= 0 || src.height <= 0 || src.rgb.size() !=
      static_cast<size_t>(src.width) * static_cast<size_t>(src.height) * 3)
    fail(ErrorKind::decode_failed, "resize: malformed source image");
  Image dst;
  dst.width = out_w;
  dst.height = out_h;
  dst.rgb.resize(static_cast<size_t>(out_w) * static_cast<size_t>(out_h) * 3);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
        double bot = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
        double v = top * (1.0 - wy) + bot * wy;
        dst.rgb[(static_cast<size_t>(y) * static_cast<size_t>(out_w) +
                 static_cast<size_t>(x)) * 3 + static_cast<size_t>(c)] =
            static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return dst;
}

// Binary PPM (P6), maxval 255.
inline std::string ppm_encode(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

inline Image ppm_decode(const std::string& bytes, const std::string& what = "ppm") {
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (next_token() != "P6") fail(ErrorKind::decode_failed, what + ": not a P6 ppm");
  Image img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval != 255) fail(ErrorKind::decode_failed, what + ": unsupported ppm maxval");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::decode_failed, what + ": malformed ppm header");
  }
  ++pos;  // single whitespace after maxval
  size_t need = static_cast<size_t>(img.width) * static_cast<size_t>(img.height) * 3;
  if (img.width <= 0 || img.height <= 0 || bytes.size() < pos + need)
    fail(ErrorKind::decode_failed, what + ": truncated ppm payload");
  img.rgb.assign(bytes.begin() + static_cast<long>(pos),
                 bytes.begin() + static_cast<long>(pos + need));
  return img;
}

// ---------------------------------------------------------------------------
// Frame sources
// ---------------------------------------------------------------------------
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::string id() const = 0;
  virtual size_t frame_count() const = 0;
  // Throws ErrorKind::decode_failed on unreadable frames.
  virtual Image frame(size_t index) const = 0;
};

class MemoryFrameSource : public FrameSource {
 public:
  MemoryFrameSource(std::string id, std::vector<Image> frames)
      : id_(std::move(id)), frames_(std::move(frames)) {}
  std::string id() const override { return id_; }
  size_t frame_count() const override { return frames_.size(); }
  Image frame(size_t index) const override {
    if (index >= frames_.size())
      fail(ErrorKind::decode_failed, "video " + id_ + ": frame index out of range");
    return frames_[index];
  }

 private:
  std::string id_;
  std::vector<Image> frames_;
};

// Directory of .ppm files, one per frame, ordered by filename.
class PpmDirectorySource : public FrameSource {
 public:
  explicit PpmDirectorySource(const std::filesystem::path& dir)
      : id_(dir.filename().string()) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".ppm") paths_.push_back(entry.path());
    }
    std::sort(paths_.begin(), paths_.end());
    if (paths_.empty())
      fail(ErrorKind::empty_video, "video " + id_ + ": no ppm frames in " + dir.string());
  }
  std::string id() const override { return id_; }
  size_t frame_count() const override { return paths_.size(); }
  Image frame(size_t index) const override {
    if (index >= paths_.size())
      fail(ErrorKind::decode_failed, "video " + id_ + ": frame index out of range");
    return ppm_decode(read_text_file(paths_[index]), "video " + id_);
  }

 private:
  std::string id_;
  std::vector<std::filesystem::path> paths_;
};

// Packed uncompressed video: magic "RGBV" u8 version, u32le width/height/frames,
// then frames * width*height*3 raw RGB bytes. Extension .rgbv.
namespace rgbv {
constexpr char kMagic[5] = "RGBV";
constexpr uint8_t kVersion = 1;

inline std::string encode(int width, int height, const std::vector<Image>& frames) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(static_cast<uint32_t>(width));
  put_u32(static_cast<uint32_t>(height));
  put_u32(static_cast<uint32_t>(frames.size()));
  for (const auto& f : frames) {
    if (f.width != width || f.height != height)
      fail(ErrorKind::invalid_argument, "rgbv: frame size mismatch");
    out.append(reinterpret_cast<const char*>(f.rgb.data()), f.rgb.size());
  }
  return out;
}
}  // namespace rgbv

class RgbvFileSource : public FrameSource {
 public:
  explicit RgbvFileSource(const std::filesystem::path& path)
      : id_(path.stem().string()), bytes_(read_text_file(path)) {
    if (bytes_.size() < 17 || std::memcmp(bytes_.data(), rgbv::kMagic, 4) != 0 ||
        static_cast<uint8_t>(bytes_[4]) != rgbv::kVersion)
      fail(ErrorKind::decode_failed, "video " + id_ + ": not an rgbv file");
    auto get_u32 = [&](size_t off) {
      uint32_t v = 0;
      for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[off + static_cast<size_t>(i)])) << (8 * i);
      return v;
    };
    width_ = static_cast<int>(get_u32(5));
    height_ = static_cast<int>(get_u32(9));
    frames_ = get_u32(13);
    if (width_ <= 0 || height_ <= 0)
      fail(ErrorKind::decode_failed, "video " + id_ + ": bad rgbv dimensions");
  }

  std::string id() const override { return id_; }
  size_t frame_count() const override { return frames_; }
  Image frame(size_t index) const override {
    if (index >= frames_)
      fail(ErrorKind::decode_failed, "video " + id_ + ": frame index out of range");
    const size_t frame_bytes = static_cast<size_t>(width_) * static_cast<size_t>(height_) * 3;
    const size_t off = 17 + index * frame_bytes;
    if (off + frame_bytes > bytes_.size())
      fail(ErrorKind::decode_failed, "video " + id_ + ": truncated stream at frame " +
                                         std::to_string(index));
    Image img;
    img.width = width_;
    img.height = height_;
    img.rgb.assign(bytes_.begin() + static_cast<long>(off),
                   bytes_.begin() + static_cast<long>(off + frame_bytes));
    return img;
  }

 private:
  std::string id_;
  std::string bytes_;
  int width_ = 0;
  int height_ = 0;
  size_t frames_ = 0;
};

}  // namespace nvcap

#endif  // NVCAP_IMAGE_HPP
