#include "cooc/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "binio.hpp"

namespace cooc {

PatchFeature PatchFeatures::at(std::size_t i) const {
  const auto r = row(i);
  return {std::vector<double>(r.begin(), r.end()), centers_[i]};
}

void PatchFeatures::push_back(std::span<const double> v, PixelLocation center) {
  if (dim_ == 0 && centers_.empty()) dim_ = static_cast<int>(v.size());
  if (v.size() != static_cast<std::size_t>(dim_))
    fail(ErrorCode::shape, "feature dimension " + std::to_string(v.size()) + " != " + std::to_string(dim_));
  values_.insert(values_.end(), v.begin(), v.end());
  centers_.push_back(center);
}

void PatchFeatures::append(const PatchFeatures& other) {
  for (std::size_t i = 0; i < other.size(); ++i) push_back(other.row(i), other.center(i));
  grid_width = grid_height = 0;
}

PatchFeatures extract_dense(const RasterImage& img, int patch_size, int stride) {
  if (patch_size < 1 || stride < 1) fail(ErrorCode::argument, "patch size and stride must be >= 1");
  if (img.width < patch_size || img.height < patch_size)
    fail(ErrorCode::shape, "image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                               " smaller than patch " + std::to_string(patch_size));
  const int w = img.width, h = img.height;
  constexpr int per_channel = kOrientationBins + kIntensityBins;

  // One summed-area table per (channel, bin); each patch then costs O(dim).
  const std::size_t iw = static_cast<std::size_t>(w) + 1;
  const std::size_t plane = iw * (h + 1);
  std::vector<double> sat(plane * kPatchDescriptorDim, 0.0);
  auto pixel = [&](int r, int c, int ch) {
    return static_cast<double>(img.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1), ch));
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < RasterImage::channels; ++ch) {
        const double gx = pixel(r, c + 1, ch) - pixel(r, c - 1, ch);
        const double gy = pixel(r + 1, c, ch) - pixel(r - 1, c, ch);
        const double mag = std::hypot(gx, gy);
        double angle = std::atan2(gy, gx);
        if (angle < 0) angle += 2 * std::numbers::pi;
        const int obin = std::min(kOrientationBins - 1,
                                  static_cast<int>(angle / (2 * std::numbers::pi) * kOrientationBins));
        const int ibin = img.at(r, c, ch) * kIntensityBins / 256;
        const int base = ch * per_channel;
        sat[(base + obin) * plane + (r + 1) * iw + (c + 1)] += mag / 255.0;
        sat[(base + kOrientationBins + ibin) * plane + (r + 1) * iw + (c + 1)] += 1.0;
      }
    }
  }
  for (int b = 0; b < kPatchDescriptorDim; ++b) {
    double* t = sat.data() + b * plane;
    for (int r = 1; r <= h; ++r)
      for (int c = 1; c <= w; ++c)
        t[r * iw + c] += t[(r - 1) * iw + c] + t[r * iw + c - 1] - t[(r - 1) * iw + c - 1];
  }

  PatchFeatures out(kPatchDescriptorDim);
  out.grid_height = (h - patch_size) / stride + 1;
  out.grid_width = (w - patch_size) / stride + 1;
  const double area = static_cast<double>(patch_size) * patch_size;
  std::vector<double> v(kPatchDescriptorDim);
  for (int gr = 0; gr < out.grid_height; ++gr) {
    for (int gc = 0; gc < out.grid_width; ++gc) {
      const int r0 = gr * stride, c0 = gc * stride;
      const int r1 = r0 + patch_size, c1 = c0 + patch_size;
      for (int b = 0; b < kPatchDescriptorDim; ++b) {
        const double* t = sat.data() + b * plane;
        v[b] = (t[r1 * iw + c1] - t[r0 * iw + c1] - t[r1 * iw + c0] + t[r0 * iw + c0]) / area;
      }
      out.push_back(v, {r0 + patch_size / 2, c0 + patch_size / 2});
    }
  }
  return out;
}

DecorrelationStats DecorrelationStats::identity(int dim) {
  DecorrelationStats s;
  s.mean.assign(dim, 0.0);
  s.transform.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) s.transform[static_cast<std::size_t>(i) * dim + i] = 1.0;
  return s;
}

void sample_moments(const PatchFeatures& features, std::vector<double>& mean,
                    std::vector<double>& covariance) {
  const int d = features.dim();
  const std::size_t n = features.size();
  if (n == 0) fail(ErrorCode::argument, "empty feature sample");
  mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = features.row(i);
    for (int k = 0; k < d; ++k) mean[k] += r[k];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  covariance.assign(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = features.row(i);
    for (int k = 0; k < d; ++k) centered[k] = r[k] - mean[k];
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) covariance[a * d + b] += centered[a] * centered[b];
  }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      covariance[a * d + b] /= static_cast<double>(n);
      covariance[b * d + a] = covariance[a * d + b];
    }
}

DecorrelationStats fit_decorrelation(const PatchFeatures& features, double epsilon) {
  if (!(epsilon > 0)) fail(ErrorCode::argument, "decorrelation epsilon must be > 0");
  const int d = features.dim();
  if (d < 1) fail(ErrorCode::shape, "features have no dimensions");
  if (features.size() < static_cast<std::size_t>(d) + 1)
    fail(ErrorCode::rank, "need at least D+1=" + std::to_string(d + 1) + " samples, got " +
                              std::to_string(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i)
    for (double x : features.row(i))
      if (!std::isfinite(x)) fail(ErrorCode::numeric, "non-finite feature value in row " + std::to_string(i));

  DecorrelationStats stats;
  std::vector<double> cov;
  sample_moments(features, stats.mean, cov);

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sigma(cov.data(), d, d);
  Eigen::MatrixXd reg = sigma;
  reg.diagonal().array() += epsilon;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reg);
  if (eig.info() != Eigen::Success) fail(ErrorCode::numeric, "covariance eigendecomposition failed");
  // Clamp round-off below epsilon; reg is PSD + eps I in exact arithmetic.
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(epsilon).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd t = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();

  stats.transform.resize(static_cast<std::size_t>(d) * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) stats.transform[a * d + b] = 0.5 * (t(a, b) + t(b, a));
  return stats;
}

namespace {
void whiten_into(const DecorrelationStats& s, std::span<const double> in, std::span<double> out) {
  const int d = s.dim();
  if (in.size() != static_cast<std::size_t>(d))
    fail(ErrorCode::shape, "feature dimension " + std::to_string(in.size()) +
                               " does not match decorrelation dimension " + std::to_string(d));
  std::vector<double> c(d);
  for (int k = 0; k < d; ++k) c[k] = in[k] - s.mean[k];
  for (int a = 0; a < d; ++a) {
    double acc = 0.0;
    const double* row = s.transform.data() + static_cast<std::size_t>(a) * d;
    for (int b = 0; b < d; ++b) acc += row[b] * c[b];
    out[a] = acc;
  }
}
}  // namespace

PatchFeature apply_decorrelation(const DecorrelationStats& stats, const PatchFeature& f) {
  PatchFeature out{std::vector<double>(f.values.size()), f.center};
  whiten_into(stats, f.values, out.values);
  return out;
}

void apply_decorrelation(const DecorrelationStats& stats, PatchFeatures& features) {
  if (features.dim() != stats.dim())
    fail(ErrorCode::shape, "feature dimension " + std::to_string(features.dim()) +
                               " does not match decorrelation dimension " + std::to_string(stats.dim()));
  std::vector<double> tmp(stats.dim());
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto r = features.row(i);
    whiten_into(stats, r, tmp);
    std::copy(tmp.begin(), tmp.end(), r.begin());
  }
}

std::vector<std::uint8_t> encode_feat(const PatchFeatures& features) {
  detail::ByteWriter w;
  w.magic("FEAT");
  w.u32(static_cast<std::uint32_t>(features.dim()));
  w.u32(static_cast<std::uint32_t>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i)
    for (double x : features.row(i)) w.f32(static_cast<float>(x));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto c = features.center(i);
    if (c.row < 0 || c.col < 0 || c.row > 0xFFFF || c.col > 0xFFFF)
      fail(ErrorCode::argument, "FEAT: center outside 16-bit range");
    w.u16(static_cast<std::uint16_t>(c.row));
    w.u16(static_cast<std::uint16_t>(c.col));
  }
  return std::move(w.bytes());
}

PatchFeatures decode_feat(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "FEAT");
  r.expect_magic("FEAT");
  const std::uint32_t d = r.u32(), n = r.u32();
  if (d == 0 || n == 0) fail(ErrorCode::decode, "FEAT: empty feature file");
  r.require(static_cast<std::size_t>(n) * d * 4 + static_cast<std::size_t>(n) * 4);
  std::vector<double> values(static_cast<std::size_t>(n) * d);
  for (auto& v : values) {
    v = r.f32();
    if (!std::isfinite(v)) fail(ErrorCode::numeric, "FEAT: non-finite feature value");
  }
  std::vector<PixelLocation> centers(n);
  for (auto& c : centers) {
    c.row = r.u16();
    c.col = r.u16();
  }
  r.expect_end();

  // Reorder into row-major lattice order and recover the grid shape.
  std::map<int, int> rows, cols;
  for (const auto& c : centers) rows[c.row] = 0, cols[c.col] = 0;
  int k = 0;
  for (auto& [_, idx] : rows) idx = k++;
  k = 0;
  for (auto& [_, idx] : cols) idx = k++;
  const std::size_t gh = rows.size(), gw = cols.size();
  if (gh * gw != n) fail(ErrorCode::decode, "FEAT: centers do not form a complete lattice");
  std::vector<std::int64_t> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = rows[centers[i].row] * gw + cols[centers[i].col];
    if (slot[s] != -1) fail(ErrorCode::decode, "FEAT: duplicate patch center");
    slot[s] = static_cast<std::int64_t>(i);
  }
  PatchFeatures out(static_cast<int>(d));
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(slot[s]);
    out.push_back(std::span<const double>(values.data() + i * d, d), centers[i]);
  }
  out.grid_height = static_cast<int>(gh);
  out.grid_width = static_cast<int>(gw);
  return out;
}

PatchFeatures load_feat(const std::filesystem::path& path) {
  try {
    return decode_feat(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw;
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void save_feat(const PatchFeatures& features, const std::filesystem::path& path) {
  write_file(path, encode_feat(features));
}

}  // namespace cooc
