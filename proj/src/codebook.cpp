#include "cooc/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binio.hpp"

namespace cooc {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

int Codebook::nearest(std::span<const double> v) const {
  if (v.size() != static_cast<std::size_t>(dim))
    fail(ErrorCode::shape, "feature dimension " + std::to_string(v.size()) +
                               " does not match codebook dimension " + std::to_string(dim));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < codewords; ++m) {
    const double d = squared_distance(v, centroid(m));
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

void Codebook::validate() const {
  if (codewords < 2) fail(ErrorCode::argument, "codebook needs M >= 2");
  if (dim < 1) fail(ErrorCode::argument, "codebook dimension must be >= 1");
  if (centroids.size() != static_cast<std::size_t>(codewords) * dim)
    fail(ErrorCode::shape, "centroid storage does not match M x D");
  if (stats.dim() != dim || stats.transform.size() != static_cast<std::size_t>(dim) * dim)
    fail(ErrorCode::shape, "decorrelation stats do not match codebook dimension");
  for (double c : centroids)
    if (!std::isfinite(c)) fail(ErrorCode::numeric, "non-finite centroid");
}

PatchSampler::PatchSampler(std::size_t per_image, std::uint64_t seed) : per_image_(per_image), rng_(seed) {
  if (per_image == 0) fail(ErrorCode::argument, "per-image sample count must be >= 1");
}

void PatchSampler::add(const PatchFeatures& f) {
  if (!out_.empty() && f.dim() != out_.dim()) fail(ErrorCode::shape, "feature dimension differs between images");
  for (std::size_t i : rng_.sample(f.size(), per_image_)) out_.push_back(f.row(i), f.center(i));
}

PatchFeatures sample_features(std::span<const PatchFeatures> per_image_features,
                              std::size_t per_image, std::uint64_t seed) {
  if (per_image_features.empty()) fail(ErrorCode::argument, "no images to sample patches from");
  PatchSampler sampler(per_image, seed);
  for (const auto& f : per_image_features) sampler.add(f);
  return sampler.take();
}

PatchFeatures sample_patches(std::span<const RasterImage> images, std::size_t per_image,
                             int patch_size, int stride, std::uint64_t seed) {
  if (images.empty()) fail(ErrorCode::argument, "no images to sample patches from");
  std::vector<PatchFeatures> dense;
  dense.reserve(images.size());
  for (const auto& img : images) dense.push_back(extract_dense(img, patch_size, stride));
  return sample_features(dense, per_image, seed);
}

Codebook kmeans(const PatchFeatures& features, int codewords, int max_iters,
                std::uint64_t seed, KMeansTrace* trace) {
  const std::size_t n = features.size();
  const int d = features.dim();
  if (codewords < 2) fail(ErrorCode::argument, "k-means needs M >= 2");
  if (n < static_cast<std::size_t>(codewords))
    fail(ErrorCode::argument, "k-means needs at least M=" + std::to_string(codewords) +
                                  " features, got " + std::to_string(n));
  if (max_iters < 1) fail(ErrorCode::argument, "k-means needs max_iters >= 1");

  Codebook cb;
  cb.codewords = codewords;
  cb.dim = d;
  cb.centroids.resize(static_cast<std::size_t>(codewords) * d);
  cb.stats = DecorrelationStats::identity(d);
  auto set_centroid = [&](int m, std::span<const double> v) {
    std::copy(v.begin(), v.end(), cb.centroids.begin() + static_cast<std::ptrdiff_t>(m) * d);
  };

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<double> nearest_d(n);
  set_centroid(0, features.row(rng.index(n)));
  for (std::size_t i = 0; i < n; ++i) nearest_d[i] = squared_distance(features.row(i), cb.centroid(0));
  for (int m = 1; m < codewords; ++m) {
    double total = 0.0;
    for (double v : nearest_d) total += v;
    if (!(total > 0.0))
      fail(ErrorCode::argument, "fewer than M=" + std::to_string(codewords) + " distinct features");
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest_d[i] <= 0.0) continue;
      acc += nearest_d[i];
      pick = i;
      if (acc > target) break;
    }
    set_centroid(m, features.row(pick));
    for (std::size_t i = 0; i < n; ++i)
      nearest_d[i] = std::min(nearest_d[i], squared_distance(features.row(i), cb.centroid(m)));
  }

  std::vector<int> assign(n, -1);
  std::vector<double> dist(n);
  std::vector<double> sums(static_cast<std::size_t>(codewords) * d);
  std::vector<std::size_t> counts(codewords);
  KMeansTrace local;
  KMeansTrace& tr = trace ? *trace : local;
  tr = {};

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int a = cb.nearest(features.row(i));
      if (a != assign[i]) changed = true;
      assign[i] = a;
      dist[i] = squared_distance(features.row(i), cb.centroid(a));
      objective += dist[i];
    }
    tr.objective.push_back(objective);
    tr.iterations = iter + 1;
    if (!changed) {
      tr.converged = true;
      break;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = features.row(i);
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * d;
      for (int k = 0; k < d; ++k) s[k] += r[k];
      ++counts[assign[i]];
    }
    for (int m = 0; m < codewords; ++m) {
      if (counts[m] == 0) continue;
      double* c = cb.centroids.data() + static_cast<std::size_t>(m) * d;
      const double* s = sums.data() + static_cast<std::size_t>(m) * d;
      for (int k = 0; k < d; ++k) c[k] = s[k] / static_cast<double>(counts[m]);
    }
    if (std::find(counts.begin(), counts.end(), 0u) != counts.end())
      for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(features.row(i), cb.centroid(assign[i]));
    for (int m = 0; m < codewords; ++m) {
      if (counts[m] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      set_centroid(m, features.row(far));
      dist[far] = 0.0;
      // The reseeded point now forms its own cluster; force a re-assignment pass.
      assign[far] = -1;
    }
  }
  return cb;
}

double kmeans_objective(const Codebook& cb, const PatchFeatures& features) {
  double s = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i)
    s += squared_distance(features.row(i), cb.centroid(cb.nearest(features.row(i))));
  return s;
}

CodewordImage encode(const Codebook& cb, const PatchFeatures& raw_features) {
  if (raw_features.dim() != cb.dim)
    fail(ErrorCode::shape, "feature dimension " + std::to_string(raw_features.dim()) +
                               " does not match codebook dimension " + std::to_string(cb.dim));
  if (raw_features.grid_width <= 0 || raw_features.grid_height <= 0 ||
      static_cast<std::size_t>(raw_features.grid_width) * raw_features.grid_height != raw_features.size())
    fail(ErrorCode::shape, "features do not form a complete patch grid");
  PatchFeatures white = raw_features;
  apply_decorrelation(cb.stats, white);
  std::vector<std::uint16_t> labels(white.size());
  for (std::size_t i = 0; i < white.size(); ++i)
    labels[i] = static_cast<std::uint16_t>(cb.nearest(white.row(i)));
  return CodewordImage(raw_features.grid_width, raw_features.grid_height, cb.codewords, std::move(labels));
}

CodewordImage encode(const Codebook& cb, const RasterImage& img, int patch_size, int stride) {
  return encode(cb, extract_dense(img, patch_size, stride));
}

std::vector<std::uint8_t> encode_codebook(const Codebook& cb) {
  cb.validate();
  detail::ByteWriter w;
  w.magic("CBK1");
  w.u32(static_cast<std::uint32_t>(cb.codewords));
  w.u32(static_cast<std::uint32_t>(cb.dim));
  for (double c : cb.centroids) w.f64(c);
  for (double m : cb.stats.mean) w.f64(m);
  for (double t : cb.stats.transform) w.f64(t);
  return std::move(w.bytes());
}

Codebook decode_codebook(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "CBK1");
  r.expect_magic("CBK1");
  Codebook cb;
  const std::uint32_t m = r.u32(), d = r.u32();
  if (m > 65536 || d > 1u << 16) fail(ErrorCode::decode, "CBK1: implausible M or D");
  cb.codewords = static_cast<int>(m);
  cb.dim = static_cast<int>(d);
  r.require(8 * (static_cast<std::size_t>(m) * d + d + static_cast<std::size_t>(d) * d));
  cb.centroids.resize(static_cast<std::size_t>(m) * d);
  for (auto& c : cb.centroids) c = r.f64();
  cb.stats.mean.resize(d);
  for (auto& v : cb.stats.mean) v = r.f64();
  cb.stats.transform.resize(static_cast<std::size_t>(d) * d);
  for (auto& v : cb.stats.transform) v = r.f64();
  r.expect_end();
  try {
    cb.validate();
  } catch (const Error& e) {
    fail(ErrorCode::decode, std::string("CBK1: ") + e.what());
  }
  return cb;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
  write_file(path, encode_codebook(cb));
}

Codebook load_codebook(const std::filesystem::path& path) {
  try {
    return decode_codebook(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw;
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace cooc
