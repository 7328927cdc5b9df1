#include "cooc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "binio.hpp"

namespace cooc {
namespace {

std::size_t flat(const CoocDescriptor::Entry& e, int codewords) {
  return static_cast<std::size_t>(e.m) * static_cast<std::size_t>(codewords) + e.n;
}

int check_codewords(std::span<const PairSample> samples) {
  if (samples.empty()) fail(ErrorCode::argument, "no training samples");
  const int m = samples.front().descriptor.codewords();
  for (const auto& s : samples) {
    if (s.descriptor.codewords() != m) fail(ErrorCode::argument, "samples mix codebook sizes");
    if (s.label != 1 && s.label != -1) fail(ErrorCode::argument, "labels must be +1 or -1");
  }
  return m;
}

double sparse_dot(std::span<const CoocDescriptor::Entry> w, std::span<const CoocDescriptor::Entry> x) {
  double s = 0.0;
  auto wi = w.begin();
  for (const auto& e : x) {
    while (wi != w.end() && (wi->m < e.m || (wi->m == e.m && wi->n < e.n))) ++wi;
    if (wi == w.end()) break;
    if (wi->m == e.m && wi->n == e.n) s += wi->value * e.value;
  }
  return s;
}

}  // namespace

std::vector<PairPlan> plan_training_pairs(std::span<const int> gallery_ids, std::span<const int> probe_ids,
                                          std::size_t neg_per_pos, std::uint64_t seed) {
  std::set<int> ids(gallery_ids.begin(), gallery_ids.end());
  ids.insert(probe_ids.begin(), probe_ids.end());
  if (ids.size() < 2) fail(ErrorCode::argument, "training pairs need at least 2 identities");

  std::vector<PairPlan> plan;
  Rng rng(seed);
  std::vector<std::size_t> others;
  for (std::size_t p = 0; p < probe_ids.size(); ++p) {
    others.clear();
    for (std::size_t g = 0; g < gallery_ids.size(); ++g)
      if (gallery_ids[g] != probe_ids[p]) others.push_back(g);
    for (std::size_t g = 0; g < gallery_ids.size(); ++g) {
      if (gallery_ids[g] != probe_ids[p]) continue;
      plan.push_back({p, g, 1});
      for (std::size_t k : rng.sample(others.size(), neg_per_pos)) plan.push_back({p, others[k], -1});
    }
  }
  return plan;
}

std::vector<PairSample> build_training_pairs(std::span<const LabeledImage> gallery,
                                             std::span<const LabeledImage> probe,
                                             std::size_t neg_per_pos, std::uint64_t seed,
                                             const SpatialKernelConfig& cfg) {
  cfg.validate();
  std::vector<int> gallery_ids, probe_ids;
  for (const auto& g : gallery) gallery_ids.push_back(g.identity);
  for (const auto& p : probe) probe_ids.push_back(p.identity);
  const auto plan = plan_training_pairs(gallery_ids, probe_ids, neg_per_pos, seed);

  std::vector<std::optional<ImageEmbedding>> pe(probe.size()), ge(gallery.size());
  std::vector<PairSample> out;
  out.reserve(plan.size());
  for (const auto& pl : plan) {
    if (!pe[pl.probe]) pe[pl.probe].emplace(probe[pl.probe].image, cfg);
    if (!ge[pl.gallery]) ge[pl.gallery].emplace(gallery[pl.gallery].image, cfg);
    out.push_back({descriptor(*pe[pl.probe], *ge[pl.gallery]), pl.label, probe[pl.probe].identity,
                   gallery[pl.gallery].identity});
  }
  return out;
}

double normalize_samples(std::vector<PairSample>& samples) {
  std::vector<CoocDescriptor> raw;
  raw.reserve(samples.size());
  for (const auto& s : samples) raw.push_back(s.descriptor);
  const double mx = minmax_fit(raw);
  for (auto& s : samples) s.descriptor = minmax_apply(s.descriptor, mx);
  return mx;
}

double LinearModel::score(const CoocDescriptor& d) const { return decision_score(*this, d); }

double decision_score(const LinearModel& model, const CoocDescriptor& d) {
  if (d.codewords() != model.codewords)
    fail(ErrorCode::argument, "descriptor M=" + std::to_string(d.codewords()) + " does not match model M=" +
                                  std::to_string(model.codewords));
  return sparse_dot(model.weights, d.entries()) + model.bias;
}

double primal_objective(const LinearModel& model, std::span<const PairSample> samples) {
  double reg = 0.0;
  for (const auto& w : model.weights) reg += w.value * w.value;
  double loss = 0.0;
  for (const auto& s : samples) loss += std::max(0.0, 1.0 - s.label * decision_score(model, s.descriptor));
  return 0.5 * reg + model.c * loss;
}

LinearModel train_svm(std::span<const PairSample> samples, double c, int epochs, std::uint64_t seed,
                      SvmTrace* trace) {
  const int m = check_codewords(samples);
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::argument, "c must be > 0");
  if (epochs < 1) fail(ErrorCode::argument, "epochs must be >= 1");
  const bool has_pos = std::any_of(samples.begin(), samples.end(), [](const auto& s) { return s.label > 0; });
  const bool has_neg = std::any_of(samples.begin(), samples.end(), [](const auto& s) { return s.label < 0; });
  if (!has_pos || !has_neg) fail(ErrorCode::argument, "training needs both positive and negative samples");

  const std::size_t n = samples.size();
  const std::size_t dim = static_cast<std::size_t>(m) * m;
  const double lambda = 1.0 / (c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  // w = scale * v. The running sum of iterates is u + sigma * v (sparse
  // updates to v are compensated in u), so each step costs O(nnz).
  std::vector<double> v(dim, 0.0), u(dim, 0.0);
  double scale = 1.0, norm2_v = 0.0, bias = 0.0;
  double sigma = 0.0, bias_sum = 0.0;
  std::uint64_t t = 0;

  auto averaged = [&]() {
    LinearModel avg{m, {}, bias_sum / static_cast<double>(t), c};
    for (std::size_t k = 0; k < dim; ++k) {
      const double w = (u[k] + sigma * v[k]) / static_cast<double>(t);
      if (w != 0.0) avg.weights.push_back({static_cast<std::uint32_t>(k / m), static_cast<std::uint32_t>(k % m), w});
    }
    return avg;
  };

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (trace) trace->epoch_objective.clear();

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const auto& s = samples[i];
      const double y = s.label;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      double vx = 0.0;
      for (const auto& e : s.descriptor.entries()) vx += v[flat(e, m)] * e.value;
      const double margin = y * (scale * vx + bias);

      if (t > 1) scale *= 1.0 - 1.0 / static_cast<double>(t);
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (const auto& e : s.descriptor.entries()) {
          const std::size_t k = flat(e, m);
          const double delta = step * e.value;
          norm2_v += delta * (2.0 * v[k] + delta);
          v[k] += delta;
          u[k] -= sigma * delta;
        }
        bias += eta * y;
      }
      const double wnorm = scale * std::sqrt(std::max(norm2_v, 0.0));
      if (wnorm > radius) scale *= radius / wnorm;

      if (scale < 1e-8) {
        for (auto& x : v) x *= scale;
        norm2_v *= scale * scale;
        sigma /= scale;
        scale = 1.0;
      }
      sigma += scale;
      bias_sum += bias;
    }
    if (trace) trace->epoch_objective.push_back(primal_objective(averaged(), samples));
  }
  return averaged();
}

std::vector<FoldSplit> identity_folds(std::span<const PairSample> samples, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::argument, "cross-validation needs at least 2 folds");
  std::set<int> id_set;
  for (const auto& s : samples) id_set.insert(s.probe_id), id_set.insert(s.gallery_id);
  std::vector<int> ids(id_set.begin(), id_set.end());
  if (ids.size() < static_cast<std::size_t>(folds))
    fail(ErrorCode::argument, "cross-validation needs at least as many identities (" + std::to_string(ids.size()) +
                                  ") as folds (" + std::to_string(folds) + ")");
  Rng rng(seed);
  rng.shuffle(ids);
  std::map<int, int> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i % folds);

  std::vector<FoldSplit> out(folds);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int fp = fold_of[samples[i].probe_id], fg = fold_of[samples[i].gallery_id];
    for (int k = 0; k < folds; ++k) {
      if (fp == k && fg == k) out[k].validation.push_back(i);
      else if (fp != k && fg != k) out[k].train.push_back(i);
    }
  }
  return out;
}

double cross_validate_c(std::span<const PairSample> samples, std::span<const double> c_grid, int folds,
                        std::uint64_t seed, int epochs) {
  if (c_grid.empty()) fail(ErrorCode::argument, "c grid is empty");
  for (double c : c_grid)
    if (!(c > 0.0)) fail(ErrorCode::argument, "c grid values must be > 0");
  check_codewords(samples);
  const auto splits = identity_folds(samples, folds, seed);
  std::vector<double> grid(c_grid.begin(), c_grid.end());
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();

  double best_c = grid.front(), best_acc = -1.0;
  for (double c : grid) {
    double acc_sum = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < splits.size(); ++k) {
      const auto& split = splits[k];
      if (split.validation.empty()) continue;
      std::vector<PairSample> train;
      train.reserve(split.train.size());
      for (auto i : split.train) train.push_back(samples[i]);
      const bool pos = std::any_of(train.begin(), train.end(), [](const auto& s) { return s.label > 0; });
      const bool neg = std::any_of(train.begin(), train.end(), [](const auto& s) { return s.label < 0; });
      std::size_t correct = 0;
      if (pos && neg) {
        const auto model = train_svm(train, c, epochs, seed + k);
        for (auto i : split.validation)
          correct += ((decision_score(model, samples[i].descriptor) > 0.0 ? 1 : -1) == samples[i].label);
      } else {
        // Degenerate fold: constant prediction of whichever class was seen.
        const int only = pos ? 1 : -1;
        for (auto i : split.validation) correct += samples[i].label == only;
      }
      acc_sum += static_cast<double>(correct) / static_cast<double>(split.validation.size());
      ++used;
    }
    if (used == 0) fail(ErrorCode::argument, "no fold has validation samples");
    const double acc = acc_sum / used;
    if (acc > best_acc) {
      best_acc = acc;
      best_c = c;
    }
  }
  return best_c;
}

std::vector<std::uint8_t> encode_model(const LinearModel& model) {
  detail::ByteWriter w;
  w.magic("LSVM");
  w.u32(static_cast<std::uint32_t>(model.codewords));
  w.f64(model.bias);
  w.f64(model.c);
  w.u32(static_cast<std::uint32_t>(model.weights.size()));
  for (const auto& e : model.weights) {
    w.u32(e.m);
    w.u32(e.n);
    w.f64(e.value);
  }
  return std::move(w.bytes());
}

LinearModel decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "LSVM");
  r.expect_magic("LSVM");
  LinearModel model;
  model.codewords = static_cast<int>(r.u32());
  model.bias = r.f64();
  model.c = r.f64();
  const std::uint32_t count = r.u32();
  r.require(static_cast<std::size_t>(count) * 16);
  model.weights.resize(count);
  for (auto& e : model.weights) {
    e.m = r.u32();
    e.n = r.u32();
    e.value = r.f64();
    if (e.m >= static_cast<std::uint32_t>(model.codewords) || e.n >= static_cast<std::uint32_t>(model.codewords))
      fail(ErrorCode::decode, "LSVM: weight index outside M x M");
    if (!std::isfinite(e.value)) fail(ErrorCode::decode, "LSVM: non-finite weight");
  }
  r.expect_end();
  if (model.codewords < 1 || !std::isfinite(model.bias)) fail(ErrorCode::decode, "LSVM: bad header");
  for (std::size_t i = 1; i < model.weights.size(); ++i) {
    const auto &a = model.weights[i - 1], &b = model.weights[i];
    if (a.m > b.m || (a.m == b.m && a.n >= b.n)) fail(ErrorCode::decode, "LSVM: weights not sorted");
  }
  return model;
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

LinearModel load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw;
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace cooc
