#pragma once

// Visual word co-occurrence descriptors.
//
// Each codeword z of a codeword image I defines a uniform spatial
// distribution p(.|z, I) over its support C(I, z). The co-occurrence value of
// codeword m in image 1 and codeword n in image 2 is the RKHS inner product of
// the two kernel mean embeddings:
//
//   phi_mn = sum_u sum_v K(u, v) p(u | m, I1) q(v | n, I2)
//
// with K one of
//   identity   K(u, v) = [u == v]                        -> |C1 & C2| / (|C1| |C2|)
//   rbf        K(u, v) = k(u, v),  k = exp(-|u-v|^2 / 2 sigma^2)
//   latent     K(u, v) = sum_h k(u, h) k(v, h) p(h),     p(h) = 1/|grid|
//
// The *_bound kinds drop an inner sum. Masses sum to one, so
// sum_v k(u, v) q(v) <= max_v k(u, v), which gives upper bounds:
//   rbf_bound     sum_u p(u) max_v k(u, v)
//   latent_bound  sum_h p(h) max_u k(u, h) * max_v k(v, h)
// Since k decreases with distance, max_u k(u, h) = exp(-DT(h) / 2 sigma^2)
// with DT the squared Euclidean distance transform of the support. That is
// how the bound kinds are evaluated.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cooc/core.hpp"

namespace cooc {

enum class KernelKind { identity, rbf_exact, rbf_bound, latent_exact, latent_bound };

/// CLI spelling: identity | rbf | rbf-bound | latent | latent-bound.
KernelKind parse_kernel_kind(std::string_view name);
std::string_view kernel_name(KernelKind kind) noexcept;
bool is_latent(KernelKind kind) noexcept;

struct SpatialKernelConfig {
  KernelKind kind = KernelKind::latent_bound;
  double sigma = 3.0;

  void validate() const;
};

struct SpatialDistribution {
  int width = 0;
  int height = 0;
  std::vector<PixelLocation> support;

  bool empty() const noexcept { return support.empty(); }
  /// Mass of each support location; 0 for the zero measure.
  double mass() const noexcept { return support.empty() ? 0.0 : 1.0 / static_cast<double>(support.size()); }
};

SpatialDistribution spatial_distribution(const CodewordImage& img, int z);

double cooc_identity(const SpatialDistribution& p, const SpatialDistribution& q);
double cooc_rbf_exact(const SpatialDistribution& p, const SpatialDistribution& q, double sigma);
double cooc_rbf_bound(const SpatialDistribution& p, const SpatialDistribution& q, double sigma);
double cooc_latent_exact(const SpatialDistribution& p, const SpatialDistribution& q, double sigma);
double cooc_latent_bound(const SpatialDistribution& p, const SpatialDistribution& q, double sigma);

/// Squared Euclidean distance to the nearest support pixel; +inf everywhere
/// when the support is empty.
struct DistanceTransform {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Exact, O(width * height): separable lower envelope of parabolas.
DistanceTransform distance_transform(std::span<const PixelLocation> support, int width, int height);

/// Sparse M x M descriptor. Entries are kept sorted by (m, n) and exact zeros
/// are not stored.
class CoocDescriptor {
 public:
  struct Entry {
    std::uint32_t m;
    std::uint32_t n;
    double value;
  };

  CoocDescriptor() = default;
  CoocDescriptor(int codewords, std::vector<Entry> entries);

  int codewords() const noexcept { return codewords_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  /// Throws index for m or n outside [0, M).
  double value(int m, int n) const;
  double max_value() const noexcept;

  /// Divisor applied by minmax_apply; 1 for raw descriptors.
  double norm_max = 1.0;

  friend bool operator==(const CoocDescriptor& a, const CoocDescriptor& b);

 private:
  int codewords_ = 0;
  std::vector<Entry> entries_;
};

/// Per-image precomputation for one kernel configuration: supports, and for
/// the latent kinds one kernel image per present codeword. Immutable; build
/// once per image and reuse across every pair involving it.
class ImageEmbedding {
 public:
  ImageEmbedding(const CodewordImage& img, const SpatialKernelConfig& cfg);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int codewords() const noexcept { return codewords_; }
  const SpatialKernelConfig& config() const noexcept { return cfg_; }

 private:
  friend CoocDescriptor descriptor(const ImageEmbedding& a, const ImageEmbedding& b);

  int width_ = 0;
  int height_ = 0;
  int codewords_ = 0;
  SpatialKernelConfig cfg_;
  std::vector<std::uint16_t> labels_;
  std::vector<int> present_;                       // present codewords, ascending
  std::vector<std::vector<PixelLocation>> supports_;  // indexed by codeword
  std::vector<double> kernel_images_;              // present_.size() x (w*h), latent kinds
  std::vector<DistanceTransform> transforms_;      // per present codeword, rbf_bound
};

CoocDescriptor descriptor(const ImageEmbedding& a, const ImageEmbedding& b);
CoocDescriptor descriptor(const CodewordImage& img1, const CodewordImage& img2,
                          const SpatialKernelConfig& cfg);

/// Largest entry over all training descriptors.
double minmax_fit(std::span<const CoocDescriptor> train);
/// Divides every entry by max(max_value, machine epsilon); no clipping.
CoocDescriptor minmax_apply(const CoocDescriptor& d, double max_value);

// COOC: "COOC", M (u32 LE), entry count (u32 LE), then (m u32, n u32, value f64).
std::vector<std::uint8_t> encode_descriptor(const CoocDescriptor& d);
CoocDescriptor decode_descriptor(std::span<const std::uint8_t> bytes);

}  // namespace cooc
