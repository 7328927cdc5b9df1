#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cooc/core.hpp"
#include "cooc/features.hpp"

namespace cooc {

/// M centroids in (decorrelated) feature space plus the decorrelation that
/// maps raw patch features into that space.
struct Codebook {
  int codewords = 0;
  int dim = 0;
  std::vector<double> centroids;  // codewords x dim, row-major
  DecorrelationStats stats;

  std::span<const double> centroid(int m) const {
    return {centroids.data() + static_cast<std::size_t>(m) * dim, static_cast<std::size_t>(dim)};
  }
  /// Index of the nearest centroid; ties go to the lowest index.
  int nearest(std::span<const double> v) const;
  void validate() const;
};

/// Streaming form of sample_features: images are fed one at a time through a
/// single generator.
class PatchSampler {
 public:
  PatchSampler(std::size_t per_image, std::uint64_t seed);
  void add(const PatchFeatures& image_features);
  const PatchFeatures& sample() const noexcept { return out_; }
  PatchFeatures take() { return std::move(out_); }

 private:
  std::size_t per_image_;
  Rng rng_;
  PatchFeatures out_;
};

/// Draws min(per_image, available) features from every image without
/// replacement. One generator is threaded through the images in order.
PatchFeatures sample_features(std::span<const PatchFeatures> per_image_features,
                              std::size_t per_image, std::uint64_t seed);
PatchFeatures sample_patches(std::span<const RasterImage> images, std::size_t per_image,
                             int patch_size, int stride, std::uint64_t seed);

struct KMeansTrace {
  std::vector<double> objective;  // after each assignment step
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded with
/// the point farthest from its current centroid. The returned codebook has
/// identity decorrelation stats.
Codebook kmeans(const PatchFeatures& features, int codewords, int max_iters,
                std::uint64_t seed, KMeansTrace* trace = nullptr);

/// Sum of squared distances from each feature to its nearest centroid.
double kmeans_objective(const Codebook& cb, const PatchFeatures& features);

/// Whitens then labels every row; features must carry a complete grid.
CodewordImage encode(const Codebook& cb, const PatchFeatures& raw_features);
CodewordImage encode(const Codebook& cb, const RasterImage& img, int patch_size, int stride = 1);

// CBK1: "CBK1", M, D (u32 LE), centroids f64 LE row-major, stats mean then
// transform (f64 LE).
std::vector<std::uint8_t> encode_codebook(const Codebook& cb);
Codebook decode_codebook(std::span<const std::uint8_t> bytes);
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace cooc
