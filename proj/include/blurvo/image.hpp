#pragma once

// Single-channel float images, bilinear sampling, gradients, box-filter
// pyramids and PGM/PFM file I/O.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "blurvo/error.hpp"
#include "blurvo/lie.hpp"

namespace blurvo {

/// Row-major W x H float image.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f)
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw Error(ErrorCode::BadParams, "negative image size");
  }
  GrayImage(int width, int height, std::vector<float> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<size_t>(width) * height) {
      throw Error(ErrorCode::DimensionMismatch, "image buffer size");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  float& at(int u, int v) { return data_[static_cast<size_t>(v) * width_ + u]; }
  float at(int u, int v) const { return data_[static_cast<size_t>(v) * width_ + u]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width_ - 1 && v <= height_ - 1;
  }

  double mean() const {
    double s = 0.0;
    for (float x : data_) s += x;
    return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
  }

  bool operator==(const GrayImage& o) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

struct SampleWithGradient {
  double value;
  Vec2 gradient;  // exact derivative of the bilinear interpolant
};

namespace detail {

struct BilinearCell {
  int u0, v0;
  double fu, fv;
};

inline std::optional<BilinearCell> locate(const GrayImage& img, double u, double v) {
  if (!img.contains(u, v) || img.width() < 2 || img.height() < 2) return std::nullopt;
  int u0 = static_cast<int>(u);
  int v0 = static_cast<int>(v);
  if (u0 == img.width() - 1) --u0;
  if (v0 == img.height() - 1) --v0;
  return BilinearCell{u0, v0, u - u0, v - v0};
}

}  // namespace detail

/// Bilinear sample; nullopt outside [0, W-1] x [0, H-1].
inline std::optional<double> try_sample(const GrayImage& img, double u, double v) {
  const auto c = detail::locate(img, u, v);
  if (!c) return std::nullopt;
  const double a = img.at(c->u0, c->v0), b = img.at(c->u0 + 1, c->v0);
  const double d = img.at(c->u0, c->v0 + 1), e = img.at(c->u0 + 1, c->v0 + 1);
  return (1.0 - c->fv) * ((1.0 - c->fu) * a + c->fu * b) + c->fv * ((1.0 - c->fu) * d + c->fu * e);
}

inline std::optional<SampleWithGradient> try_sample_with_gradient(const GrayImage& img, double u,
                                                                   double v) {
  const auto c = detail::locate(img, u, v);
  if (!c) return std::nullopt;
  const double a = img.at(c->u0, c->v0), b = img.at(c->u0 + 1, c->v0);
  const double d = img.at(c->u0, c->v0 + 1), e = img.at(c->u0 + 1, c->v0 + 1);
  const double top = (1.0 - c->fu) * a + c->fu * b;
  const double bottom = (1.0 - c->fu) * d + c->fu * e;
  SampleWithGradient out;
  out.value = (1.0 - c->fv) * top + c->fv * bottom;
  out.gradient = Vec2((1.0 - c->fv) * (b - a) + c->fv * (e - d), bottom - top);
  return out;
}

inline double sample_bilinear(const GrayImage& img, const Vec2& x) {
  const auto s = try_sample(img, x.x(), x.y());
  if (!s) throw Error(ErrorCode::OutOfBounds, "bilinear sample outside image");
  return *s;
}

/// Central differences of bilinear samples at unit spacing.
inline Vec2 gradient(const GrayImage& img, const Vec2& x) {
  if (!(x.x() >= 1.0 && x.y() >= 1.0 && x.x() <= img.width() - 2 && x.y() <= img.height() - 2)) {
    throw Error(ErrorCode::OutOfBounds, "gradient needs a one-pixel border");
  }
  const double du = sample_bilinear(img, x + Vec2(1, 0)) - sample_bilinear(img, x - Vec2(1, 0));
  const double dv = sample_bilinear(img, x + Vec2(0, 1)) - sample_bilinear(img, x - Vec2(0, 1));
  return {0.5 * du, 0.5 * dv};
}

/// Gradient magnitude at every pixel (zero on the one-pixel border).
inline GrayImage gradient_magnitude(const GrayImage& img) {
  GrayImage out(img.width(), img.height(), 0.0f);
  for (int v = 1; v + 1 < img.height(); ++v) {
    for (int u = 1; u + 1 < img.width(); ++u) {
      const double gu = 0.5 * (static_cast<double>(img.at(u + 1, v)) - img.at(u - 1, v));
      const double gv = 0.5 * (static_cast<double>(img.at(u, v + 1)) - img.at(u, v - 1));
      out.at(u, v) = static_cast<float>(std::sqrt(gu * gu + gv * gv));
    }
  }
  return out;
}

/// 2x2 box-filter downsampling, floor division of the size.
inline GrayImage downsample(const GrayImage& img) {
  GrayImage out(img.width() / 2, img.height() / 2);
  for (int v = 0; v < out.height(); ++v) {
    for (int u = 0; u < out.width(); ++u) {
      const double s = static_cast<double>(img.at(2 * u, 2 * v)) + img.at(2 * u + 1, 2 * v) +
                       img.at(2 * u, 2 * v + 1) + img.at(2 * u + 1, 2 * v + 1);
      out.at(u, v) = static_cast<float>(0.25 * s);
    }
  }
  return out;
}

class ImagePyramid {
 public:
  ImagePyramid() = default;
  explicit ImagePyramid(std::vector<GrayImage> levels) : levels_(std::move(levels)) {}

  size_t size() const { return levels_.size(); }
  const GrayImage& level(size_t i) const { return levels_.at(i); }
  const GrayImage& operator[](size_t i) const { return levels_[i]; }

 private:
  std::vector<GrayImage> levels_;
};

/// Level 0 is the input; each coarser level halves both dimensions. The
/// coarsest level must be at least `min_size` pixels in each dimension.
inline ImagePyramid build_pyramid(const GrayImage& img, int n_levels, int min_size = 32) {
  if (n_levels < 1) throw Error(ErrorCode::TooManyLevels, "need at least one level");
  const int shrink = 1 << (n_levels - 1);
  if (img.width() / shrink < min_size || img.height() / shrink < min_size) {
    throw Error(ErrorCode::TooManyLevels, std::to_string(n_levels) + " levels for " +
                                              std::to_string(img.width()) + "x" +
                                              std::to_string(img.height()));
  }
  std::vector<GrayImage> levels;
  levels.reserve(n_levels);
  levels.push_back(img);
  for (int l = 1; l < n_levels; ++l) levels.push_back(downsample(levels.back()));
  return ImagePyramid(std::move(levels));
}

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

inline int parse_int(const std::string& tok, const std::string& what) {
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad " + what + " '" + tok + "'");
  }
}

}  // namespace detail

/// Reads binary PGM (P5) or PPM (P6, converted to luma) with maxval 255.
inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string magic = detail::next_token(in);
  if (magic != "P5" && magic != "P6") throw Error(ErrorCode::ParseError, "not a P5/P6 file: " + path.string());
  const int w = detail::parse_int(detail::next_token(in), "width");
  const int h = detail::parse_int(detail::next_token(in), "height");
  const int maxval = detail::parse_int(detail::next_token(in), "maxval");
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::ParseError, "unsupported header in " + path.string());
  in.get();
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorCode::IoError, "truncated image " + path.string());
  }
  GrayImage img(w, h);
  auto out = img.data();
  for (size_t i = 0; i < out.size(); ++i) {
    if (channels == 1) {
      out[i] = static_cast<float>(raw[i] / 255.0);
    } else {
      const double y = 0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2];
      out[i] = static_cast<float>(y / 255.0);
    }
  }
  return img;
}

inline unsigned char to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.data().size());
  std::transform(img.data().begin(), img.data().end(), raw.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed " + path.string());
}

/// Quantizes to the 8-bit grid used by PGM files.
inline GrayImage quantize8(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (size_t i = 0; i < out.data().size(); ++i) out.data()[i] = static_cast<float>(to_byte(img.data()[i]) / 255.0);
  return out;
}

/// Grayscale PFM ("Pf"), little-endian float32, bottom-up scanlines.
inline void save_pfm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "Pf\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");
  for (int v = img.height() - 1; v >= 0; --v) {
    out.write(reinterpret_cast<const char*>(&img.data()[static_cast<size_t>(v) * img.width()]),
              static_cast<std::streamsize>(sizeof(float) * img.width()));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed " + path.string());
}

inline GrayImage load_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic, line;
  std::getline(in, magic);
  if (magic != "Pf") throw Error(ErrorCode::ParseError, "not a grayscale PFM: " + path.string());
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  in.get();
  if (!in || w <= 0 || h <= 0 || scale == 0.0) throw Error(ErrorCode::ParseError, "bad PFM header " + path.string());
  const bool little = scale < 0.0;
  GrayImage img(w, h);
  std::vector<char> row(sizeof(float) * w);
  for (int v = h - 1; v >= 0; --v) {
    in.read(row.data(), static_cast<std::streamsize>(row.size()));
    if (in.gcount() != static_cast<std::streamsize>(row.size())) throw Error(ErrorCode::IoError, "truncated PFM");
    for (int u = 0; u < w; ++u) {
      uint32_t bits;
      std::memcpy(&bits, row.data() + sizeof(float) * u, sizeof(bits));
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      img.at(u, v) = std::bit_cast<float>(bits);
    }
  }
  return img;
}

}  // namespace blurvo
