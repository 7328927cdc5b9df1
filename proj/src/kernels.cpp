#include "cooc/kernels.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "binio.hpp"

namespace cooc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gaussian_sq(double d2, double sigma) { return std::exp(-d2 / (2.0 * sigma * sigma)); }

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(ErrorCode::argument, "sigma must be a positive finite number");
}

// Squared distance of integer offsets, exact in double.
double sq(int dr, int dc) { return static_cast<double>(dr) * dr + static_cast<double>(dc) * dc; }

// One dimension of the lower-envelope transform; +inf samples contribute no
// parabola.
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    auto intersect = [&](int p) {
      return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
             (2.0 * q - 2.0 * p);
    };
    double s = intersect(v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double off = q - v[k];
    d[q] = off * off + f[v[k]];
  }
}

// max_u k(u, h) for every h: exp(-DT / 2 sigma^2).
void bound_kernel_image(std::span<const PixelLocation> support, int w, int h, double sigma,
                        double* out) {
  const auto dt = distance_transform(support, w, h);
  for (std::size_t i = 0; i < dt.values.size(); ++i) out[i] = gaussian_sq(dt.values[i], sigma);
}

// sum_u k(u, h) p(u) for every h, separably: first along columns within each
// support row, then along rows.
void exact_kernel_image(std::span<const PixelLocation> support, int w, int h, double sigma,
                        double* out) {
  std::vector<double> g(static_cast<std::size_t>(std::max(w, h)));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = gaussian_sq(static_cast<double>(i) * i, sigma);
  std::vector<double> rows(static_cast<std::size_t>(w) * h, 0.0);
  for (const auto& u : support)
    for (int c = 0; c < w; ++c) rows[static_cast<std::size_t>(u.row) * w + c] += g[std::abs(c - u.col)];
  const double count = static_cast<double>(support.size());
  for (int hr = 0; hr < h; ++hr) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int r = 0; r < h; ++r) acc += g[std::abs(hr - r)] * rows[static_cast<std::size_t>(r) * w + c];
      out[static_cast<std::size_t>(hr) * w + c] = acc / count;
    }
  }
}

// Dot product with a fixed accumulation order; dot(a, b) == dot(b, a) bitwise.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc[i % 4] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// Exact RBF double sum grouped by squared distance: integer pair counts per
// distance, summed in ascending distance order. Symmetric in (a, b) bitwise.
class RbfPairSum {
 public:
  RbfPairSum(int max_w, int max_h, double sigma)
      : table_(static_cast<std::size_t>(sq(max_h - 1, max_w - 1)) + 1), counts_(table_.size(), 0) {
    for (std::size_t d2 = 0; d2 < table_.size(); ++d2) table_[d2] = gaussian_sq(static_cast<double>(d2), sigma);
  }

  double operator()(std::span<const PixelLocation> a, std::span<const PixelLocation> b) {
    if (a.empty() || b.empty()) return 0.0;
    touched_.clear();
    for (const auto& u : a)
      for (const auto& v : b) {
        const auto d2 = static_cast<std::size_t>(sq(u.row - v.row, u.col - v.col));
        if (counts_[d2]++ == 0) touched_.push_back(d2);
      }
    std::sort(touched_.begin(), touched_.end());
    double s = 0.0;
    for (auto d2 : touched_) {
      s += static_cast<double>(counts_[d2]) * table_[d2];
      counts_[d2] = 0;
    }
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  }

 private:
  std::vector<double> table_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::size_t> touched_;
};

double rbf_bound_sum(std::span<const PixelLocation> a, const DistanceTransform& dt_b,
                     std::size_t b_count, double sigma) {
  if (a.empty() || b_count == 0) return 0.0;
  double s = 0.0;
  for (const auto& u : a) s += gaussian_sq(dt_b.at(u.row, u.col), sigma);
  return s / static_cast<double>(a.size());
}

void require_same_grid(const SpatialDistribution& p, const SpatialDistribution& q) {
  if (p.width != q.width || p.height != q.height)
    fail(ErrorCode::argument, "latent kernels need both distributions on the same grid");
}

}  // namespace

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "identity") return KernelKind::identity;
  if (name == "rbf") return KernelKind::rbf_exact;
  if (name == "rbf-bound") return KernelKind::rbf_bound;
  if (name == "latent") return KernelKind::latent_exact;
  if (name == "latent-bound") return KernelKind::latent_bound;
  fail(ErrorCode::argument, "unknown kernel '" + std::string(name) +
                                "' (expected identity|rbf|rbf-bound|latent|latent-bound)");
}

std::string_view kernel_name(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::identity: return "identity";
    case KernelKind::rbf_exact: return "rbf";
    case KernelKind::rbf_bound: return "rbf-bound";
    case KernelKind::latent_exact: return "latent";
    case KernelKind::latent_bound: return "latent-bound";
  }
  return "?";
}

bool is_latent(KernelKind kind) noexcept {
  return kind == KernelKind::latent_exact || kind == KernelKind::latent_bound;
}

void SpatialKernelConfig::validate() const {
  if (kind != KernelKind::identity) check_sigma(sigma);
}

SpatialDistribution spatial_distribution(const CodewordImage& img, int z) {
  return {img.width(), img.height(), codeword_support(img, z)};
}

double cooc_identity(const SpatialDistribution& p, const SpatialDistribution& q) {
  if (p.empty() || q.empty()) return 0.0;
  std::vector<PixelLocation> a = p.support, b = q.support;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else ++common, ++i, ++j;
  }
  return static_cast<double>(common) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double cooc_rbf_exact(const SpatialDistribution& p, const SpatialDistribution& q, double sigma) {
  check_sigma(sigma);
  RbfPairSum sum(std::max(p.width, q.width), std::max(p.height, q.height), sigma);
  return sum(p.support, q.support);
}

double cooc_rbf_bound(const SpatialDistribution& p, const SpatialDistribution& q, double sigma) {
  check_sigma(sigma);
  if (p.empty() || q.empty()) return 0.0;
  const auto dt = distance_transform(q.support, std::max(p.width, q.width), std::max(p.height, q.height));
  return rbf_bound_sum(p.support, dt, q.support.size(), sigma);
}

double cooc_latent_exact(const SpatialDistribution& p, const SpatialDistribution& q, double sigma) {
  check_sigma(sigma);
  require_same_grid(p, q);
  if (p.empty() || q.empty()) return 0.0;
  const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
  std::vector<double> a(n), b(n);
  exact_kernel_image(p.support, p.width, p.height, sigma, a.data());
  exact_kernel_image(q.support, q.width, q.height, sigma, b.data());
  return dot(a.data(), b.data(), n) / static_cast<double>(n);
}

double cooc_latent_bound(const SpatialDistribution& p, const SpatialDistribution& q, double sigma) {
  check_sigma(sigma);
  require_same_grid(p, q);
  if (p.empty() || q.empty()) return 0.0;
  const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
  std::vector<double> a(n), b(n);
  bound_kernel_image(p.support, p.width, p.height, sigma, a.data());
  bound_kernel_image(q.support, q.width, q.height, sigma, b.data());
  return dot(a.data(), b.data(), n) / static_cast<double>(n);
}

DistanceTransform distance_transform(std::span<const PixelLocation> support, int width, int height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::argument, "distance transform grid must be non-empty");
  DistanceTransform dt{width, height, std::vector<double>(static_cast<std::size_t>(width) * height, kInf)};
  if (support.empty()) return dt;
  for (const auto& p : support) {
    if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width)
      fail(ErrorCode::index, "support pixel outside distance transform grid");
    dt.values[static_cast<std::size_t>(p.row) * width + p.col] = 0.0;
  }
  const int n = std::max(width, height);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  std::vector<double> f, d;

  f.resize(height);
  d.resize(height);
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r < height; ++r) f[r] = dt.values[static_cast<std::size_t>(r) * width + c];
    dt1d(f, d, v, z);
    for (int r = 0; r < height; ++r) dt.values[static_cast<std::size_t>(r) * width + c] = d[r];
  }
  f.resize(width);
  d.resize(width);
  for (int r = 0; r < height; ++r) {
    double* row = dt.values.data() + static_cast<std::size_t>(r) * width;
    std::copy(row, row + width, f.begin());
    dt1d(f, d, v, z);
    std::copy(d.begin(), d.end(), row);
  }
  return dt;
}

CoocDescriptor::CoocDescriptor(int codewords, std::vector<Entry> entries)
    : codewords_(codewords), entries_(std::move(entries)) {
  if (codewords < 1) fail(ErrorCode::argument, "descriptor needs M >= 1");
  const auto key = [](const Entry& e) { return (static_cast<std::uint64_t>(e.m) << 32) | e.n; };
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.m >= static_cast<std::uint32_t>(codewords) || e.n >= static_cast<std::uint32_t>(codewords))
      fail(ErrorCode::index, "descriptor entry outside M x M");
    if (!std::isfinite(e.value) || e.value < 0.0) fail(ErrorCode::numeric, "descriptor entry not finite and >= 0");
    if (i > 0 && key(entries_[i - 1]) >= key(e)) fail(ErrorCode::argument, "descriptor entries must be strictly sorted");
  }
  std::erase_if(entries_, [](const Entry& e) { return e.value == 0.0; });
}

double CoocDescriptor::value(int m, int n) const {
  if (m < 0 || n < 0 || m >= codewords_ || n >= codewords_)
    fail(ErrorCode::index, "codeword pair (" + std::to_string(m) + ", " + std::to_string(n) + ") outside M = " +
                               std::to_string(codewords_));
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{m, n},
                                   [](const Entry& e, const std::pair<int, int>& k) {
                                     return std::pair<int, int>(static_cast<int>(e.m), static_cast<int>(e.n)) < k;
                                   });
  if (it != entries_.end() && static_cast<int>(it->m) == m && static_cast<int>(it->n) == n) return it->value;
  return 0.0;
}

double CoocDescriptor::max_value() const noexcept {
  double mx = 0.0;
  for (const auto& e : entries_) mx = std::max(mx, e.value);
  return mx;
}

bool operator==(const CoocDescriptor& a, const CoocDescriptor& b) {
  if (a.codewords_ != b.codewords_ || a.norm_max != b.norm_max || a.entries_.size() != b.entries_.size())
    return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto &x = a.entries_[i], &y = b.entries_[i];
    if (x.m != y.m || x.n != y.n || x.value != y.value) return false;
  }
  return true;
}

ImageEmbedding::ImageEmbedding(const CodewordImage& img, const SpatialKernelConfig& cfg)
    : width_(img.width()), height_(img.height()), codewords_(img.codewords()), cfg_(cfg) {
  cfg.validate();
  labels_.assign(img.labels().begin(), img.labels().end());
  supports_ = all_supports(img);
  for (int z = 0; z < codewords_; ++z)
    if (!supports_[z].empty()) present_.push_back(z);

  const std::size_t n = static_cast<std::size_t>(width_) * height_;
  switch (cfg.kind) {
    case KernelKind::latent_exact:
    case KernelKind::latent_bound:
      kernel_images_.resize(present_.size() * n);
      for (std::size_t i = 0; i < present_.size(); ++i) {
        double* out = kernel_images_.data() + i * n;
        if (cfg.kind == KernelKind::latent_exact)
          exact_kernel_image(supports_[present_[i]], width_, height_, cfg.sigma, out);
        else
          bound_kernel_image(supports_[present_[i]], width_, height_, cfg.sigma, out);
      }
      break;
    case KernelKind::rbf_bound:
      for (int z : present_) transforms_.push_back(distance_transform(supports_[z], width_, height_));
      break;
    default:
      break;
  }
}

CoocDescriptor descriptor(const ImageEmbedding& a, const ImageEmbedding& b) {
  if (a.codewords_ != b.codewords_)
    fail(ErrorCode::argument, "codeword count mismatch: " + std::to_string(a.codewords_) + " vs " +
                                  std::to_string(b.codewords_));
  if (a.cfg_.kind != b.cfg_.kind || a.cfg_.sigma != b.cfg_.sigma)
    fail(ErrorCode::argument, "embeddings were built with different kernel configurations");
  const auto& cfg = a.cfg_;
  const bool same_grid = a.width_ == b.width_ && a.height_ == b.height_;
  if (is_latent(cfg.kind) && !same_grid)
    fail(ErrorCode::argument, "latent kernels need equal grids, got " + std::to_string(a.height_) + "x" +
                                  std::to_string(a.width_) + " vs " + std::to_string(b.height_) + "x" +
                                  std::to_string(b.width_));

  std::vector<CoocDescriptor::Entry> entries;
  auto emit = [&](int m, int n, double v) {
    if (v != 0.0) entries.push_back({static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(n), v});
  };

  switch (cfg.kind) {
    case KernelKind::identity: {
      const int w = std::min(a.width_, b.width_), h = std::min(a.height_, b.height_);
      const auto mm = static_cast<std::uint64_t>(a.codewords_);
      std::vector<std::uint64_t> keys;
      keys.reserve(static_cast<std::size_t>(w) * h);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          keys.push_back(a.labels_[static_cast<std::size_t>(r) * a.width_ + c] * mm +
                         b.labels_[static_cast<std::size_t>(r) * b.width_ + c]);
      std::sort(keys.begin(), keys.end());
      for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        const int m = static_cast<int>(keys[i] / mm), n = static_cast<int>(keys[i] % mm);
        emit(m, n, static_cast<double>(j - i) /
                       (static_cast<double>(a.supports_[m].size()) * static_cast<double>(b.supports_[n].size())));
        i = j;
      }
      break;
    }
    case KernelKind::rbf_exact: {
      RbfPairSum sum(std::max(a.width_, b.width_), std::max(a.height_, b.height_), cfg.sigma);
      for (int m : a.present_)
        for (int n : b.present_) emit(m, n, sum(a.supports_[m], b.supports_[n]));
      break;
    }
    case KernelKind::rbf_bound: {
      const bool covers = b.width_ >= a.width_ && b.height_ >= a.height_;
      const int gw = std::max(a.width_, b.width_), gh = std::max(a.height_, b.height_);
      for (std::size_t j = 0; j < b.present_.size(); ++j) {
        const int n = b.present_[j];
        const DistanceTransform wide = covers ? DistanceTransform{} : distance_transform(b.supports_[n], gw, gh);
        const DistanceTransform& dt = covers ? b.transforms_[j] : wide;
        for (int m : a.present_) {
          // Entries are produced per n here; sorted below.
          emit(m, n, rbf_bound_sum(a.supports_[m], dt, b.supports_[n].size(), cfg.sigma));
        }
      }
      std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
        return x.m != y.m ? x.m < y.m : x.n < y.n;
      });
      break;
    }
    case KernelKind::latent_exact:
    case KernelKind::latent_bound: {
      const std::size_t n_pix = static_cast<std::size_t>(a.width_) * a.height_;
      const double inv = static_cast<double>(n_pix);
      for (std::size_t i = 0; i < a.present_.size(); ++i)
        for (std::size_t j = 0; j < b.present_.size(); ++j)
          emit(a.present_[i], b.present_[j],
               dot(a.kernel_images_.data() + i * n_pix, b.kernel_images_.data() + j * n_pix, n_pix) / inv);
      break;
    }
  }
  return CoocDescriptor(a.codewords_, std::move(entries));
}

CoocDescriptor descriptor(const CodewordImage& img1, const CodewordImage& img2, const SpatialKernelConfig& cfg) {
  if (img1.codewords() != img2.codewords())
    fail(ErrorCode::argument, "codeword count mismatch: " + std::to_string(img1.codewords()) + " vs " +
                                  std::to_string(img2.codewords()));
  if (is_latent(cfg.kind) && (img1.width() != img2.width() || img1.height() != img2.height()))
    fail(ErrorCode::argument, "latent kernels need equal grids");
  return descriptor(ImageEmbedding(img1, cfg), ImageEmbedding(img2, cfg));
}

double minmax_fit(std::span<const CoocDescriptor> train) {
  if (train.empty()) fail(ErrorCode::argument, "min-max fit needs at least one training descriptor");
  double mx = 0.0;
  for (const auto& d : train) mx = std::max(mx, d.max_value());
  return mx;
}

CoocDescriptor minmax_apply(const CoocDescriptor& d, double max_value) {
  if (!(max_value >= 0.0) || !std::isfinite(max_value))
    fail(ErrorCode::argument, "min-max divisor must be finite and >= 0");
  const double divisor = std::max(max_value, DBL_EPSILON);
  std::vector<CoocDescriptor::Entry> entries(d.entries().begin(), d.entries().end());
  for (auto& e : entries) e.value /= divisor;
  CoocDescriptor out(d.codewords(), std::move(entries));
  out.norm_max = divisor;
  return out;
}

std::vector<std::uint8_t> encode_descriptor(const CoocDescriptor& d) {
  detail::ByteWriter w;
  w.magic("COOC");
  w.u32(static_cast<std::uint32_t>(d.codewords()));
  w.u32(static_cast<std::uint32_t>(d.nnz()));
  for (const auto& e : d.entries()) {
    w.u32(e.m);
    w.u32(e.n);
    w.f64(e.value);
  }
  return std::move(w.bytes());
}

CoocDescriptor decode_descriptor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "COOC");
  r.expect_magic("COOC");
  const std::uint32_t m = r.u32(), count = r.u32();
  r.require(static_cast<std::size_t>(count) * 16);
  std::vector<CoocDescriptor::Entry> entries(count);
  for (auto& e : entries) {
    e.m = r.u32();
    e.n = r.u32();
    e.value = r.f64();
  }
  r.expect_end();
  try {
    return CoocDescriptor(static_cast<int>(m), std::move(entries));
  } catch (const Error& e) {
    fail(ErrorCode::decode, std::string("COOC: ") + e.what());
  }
}

}  // namespace cooc
