#pragma once

// Shared domain types, error model, deterministic RNG and raster I/O.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cooc {

enum class ErrorCode {
  io = 1,
  decode,
  unsupported_format,
  argument,
  index,
  shape,
  rank,
  numeric,
  evaluation,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure in the library surfaces as an Error carrying a code; the C
/// API maps the code to a status value one-to-one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

struct PixelLocation {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelLocation&, const PixelLocation&) = default;
  friend auto operator<=>(const PixelLocation&, const PixelLocation&) = default;
};

/// 8-bit RGB raster, row-major, interleaved channels.
struct RasterImage {
  static constexpr int channels = 3;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RasterImage() = default;
  RasterImage(int w, int h);

  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint8_t& at(int row, int col, int ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

/// Per-pixel codeword labels in [0, M).
class CodewordImage {
 public:
  CodewordImage() = default;
  CodewordImage(int width, int height, int codewords,
                std::vector<std::uint16_t> labels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int codewords() const noexcept { return codewords_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const std::uint16_t> labels() const noexcept { return labels_; }
  int label(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }

  friend bool operator==(const CodewordImage&, const CodewordImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int codewords_ = 0;
  std::vector<std::uint16_t> labels_;
};

/// C(I, z): locations labeled z, in row-major order. Throws index error if z >= M.
std::vector<PixelLocation> codeword_support(const CodewordImage& img, int z);

/// Supports of all codewords in one pass; result[z] is row-major ordered.
std::vector<std::vector<PixelLocation>> all_supports(const CodewordImage& img);

// Deterministic randomness. The engine is fully specified by the standard;
// the mappings to index/real ranges are done here so results do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  /// k distinct indices from [0, n) (k clamped to n), in draw order.
  std::vector<std::size_t> sample(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// Raster I/O: PPM (P6), 24-bit BMP, PNG (8-bit RGB).
RasterImage load_image(const std::filesystem::path& path);
/// Format chosen by extension (.ppm or .png).
void save_image(const RasterImage& img, const std::filesystem::path& path);

// CWIM container: "CWIM", width, height, M (u32 LE), labels (u16 LE) row-major.
std::vector<std::uint8_t> encode_cwim(const CodewordImage& img);
CodewordImage decode_cwim(std::span<const std::uint8_t> bytes);
void save_cwim(const CodewordImage& img, const std::filesystem::path& path);
CodewordImage load_cwim(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace cooc
