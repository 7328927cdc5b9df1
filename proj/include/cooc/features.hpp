#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cooc/core.hpp"

namespace cooc {

/// Gradient-orientation bins per channel in the built-in patch descriptor.
inline constexpr int kOrientationBins = 8;
/// Intensity bins per channel in the built-in patch descriptor.
inline constexpr int kIntensityBins = 4;
inline constexpr int kPatchDescriptorDim = RasterImage::channels * (kOrientationBins + kIntensityBins);

struct PatchFeature {
  std::vector<double> values;
  PixelLocation center;
};

/// Dense features laid out as a row-major count x dim matrix, one row per
/// patch, rows ordered by patch position in row-major order over the grid.
class PatchFeatures {
 public:
  PatchFeatures() = default;
  explicit PatchFeatures(int dim) : dim_(dim) {}

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return centers_.size(); }
  bool empty() const noexcept { return centers_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  PixelLocation center(std::size_t i) const { return centers_[i]; }
  PatchFeature at(std::size_t i) const;

  void push_back(std::span<const double> v, PixelLocation center);
  void push_back(const PatchFeature& f) { push_back(f.values, f.center); }
  void append(const PatchFeatures& other);

  /// Dimensions of the patch grid when the rows form a complete grid, else 0.
  int grid_width = 0;
  int grid_height = 0;

 private:
  int dim_ = 0;
  std::vector<double> values_;
  std::vector<PixelLocation> centers_;
};

/// Built-in descriptor over every patch whose top-left corner lies on the
/// stride lattice and which fits inside the image. The grid is
/// ((H - P) / s + 1) x ((W - P) / s + 1). Centers are reported in source
/// image coordinates as top-left + P/2.
PatchFeatures extract_dense(const RasterImage& img, int patch_size, int stride = 1);

/// Symmetric (ZCA) whitening: transform = (Sigma + eps I)^(-1/2), with Sigma
/// the population covariance of the training sample.
struct DecorrelationStats {
  std::vector<double> mean;
  std::vector<double> transform;  // dim x dim, row-major

  int dim() const noexcept { return static_cast<int>(mean.size()); }
  static DecorrelationStats identity(int dim);
};

DecorrelationStats fit_decorrelation(const PatchFeatures& features, double epsilon = 1e-6);

PatchFeature apply_decorrelation(const DecorrelationStats& stats, const PatchFeature& f);
void apply_decorrelation(const DecorrelationStats& stats, PatchFeatures& features);

/// Population mean and covariance of a feature sample.
void sample_moments(const PatchFeatures& features, std::vector<double>& mean,
                    std::vector<double>& covariance);

// External feature files: "FEAT", D, count (u32 LE), count*D f32 LE, then
// count (row, col) pairs of u16 LE. Centers must form a full lattice.
std::vector<std::uint8_t> encode_feat(const PatchFeatures& features);
PatchFeatures decode_feat(std::span<const std::uint8_t> bytes);
PatchFeatures load_feat(const std::filesystem::path& path);
void save_feat(const PatchFeatures& features, const std::filesystem::path& path);

}  // namespace cooc
