#include "cooc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace cooc {

RankingResult rank_scores(int probe_id, std::span<const std::pair<int, double>> image_scores) {
  if (image_scores.empty()) fail(ErrorCode::argument, "cannot rank against an empty gallery");
  std::map<int, std::pair<double, int>> acc;
  for (const auto& [id, s] : image_scores) {
    auto& a = acc[id];
    a.first += s;
    ++a.second;
  }
  RankingResult out{probe_id, {}};
  for (const auto& [id, a] : acc) out.ordered_gallery.push_back({id, a.first / a.second});
  std::stable_sort(out.ordered_gallery.begin(), out.ordered_gallery.end(),
                   [](const RankedIdentity& x, const RankedIdentity& y) { return x.score > y.score; });
  return out;
}

RankingResult rank_probe(const LinearModel& model, const ImageEmbedding& probe, int probe_id,
                         std::span<const ImageEmbedding> gallery, std::span<const int> gallery_ids,
                         double max_value) {
  if (gallery.empty()) fail(ErrorCode::argument, "cannot rank against an empty gallery");
  if (gallery.size() != gallery_ids.size()) fail(ErrorCode::argument, "gallery ids do not match gallery images");
  std::vector<std::pair<int, double>> scores;
  scores.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i)
    scores.emplace_back(gallery_ids[i], decision_score(model, minmax_apply(descriptor(probe, gallery[i]), max_value)));
  return rank_scores(probe_id, scores);
}

RankingResult rank_probe(const LinearModel& model, const CodewordImage& probe, int probe_id,
                         std::span<const LabeledImage> gallery, const SpatialKernelConfig& cfg,
                         double max_value) {
  if (gallery.empty()) fail(ErrorCode::argument, "cannot rank against an empty gallery");
  std::vector<ImageEmbedding> emb;
  std::vector<int> ids;
  emb.reserve(gallery.size());
  for (const auto& g : gallery) {
    emb.emplace_back(g.image, cfg);
    ids.push_back(g.identity);
  }
  return rank_probe(model, ImageEmbedding(probe, cfg), probe_id, emb, ids, max_value);
}

CmcCurve cmc(std::span<const RankingResult> results) {
  if (results.empty()) fail(ErrorCode::evaluation, "no rankings to evaluate");
  const std::size_t g = results.front().ordered_gallery.size();
  if (g == 0) fail(ErrorCode::evaluation, "empty ranking");
  std::vector<std::size_t> hits(g, 0);
  for (const auto& r : results) {
    if (r.ordered_gallery.size() != g) fail(ErrorCode::evaluation, "rankings have different gallery sizes");
    std::size_t pos = g;
    for (std::size_t i = 0; i < g; ++i)
      if (r.ordered_gallery[i].identity == r.probe_id) {
        pos = i;
        break;
      }
    if (pos == g)
      fail(ErrorCode::evaluation, "probe identity " + std::to_string(r.probe_id) + " is absent from the gallery");
    ++hits[pos];
  }
  CmcCurve out{std::vector<double>(g), 1};
  std::size_t cum = 0;
  for (std::size_t i = 0; i < g; ++i) {
    cum += hits[i];
    out.rates[i] = static_cast<double>(cum) / static_cast<double>(results.size());
  }
  return out;
}

CmcCurve average_trials(std::span<const CmcCurve> curves) {
  if (curves.empty()) fail(ErrorCode::argument, "no curves to average");
  const std::size_t g = curves.front().rates.size();
  CmcCurve out{std::vector<double>(g, 0.0), 0};
  for (const auto& c : curves) {
    if (c.rates.size() != g) fail(ErrorCode::argument, "CMC curves have different lengths");
    for (std::size_t i = 0; i < g; ++i) out.rates[i] += c.rates[i];
    out.trials += c.trials;
  }
  for (auto& r : out.rates) r /= static_cast<double>(curves.size());
  return out;
}

DatasetSplit split_dataset_count(std::span<const int> identities, std::size_t train_count, std::uint64_t seed) {
  std::set<int> unique(identities.begin(), identities.end());
  if (unique.size() != identities.size()) fail(ErrorCode::argument, "identity list has duplicates");
  if (train_count == 0 || train_count >= identities.size())
    fail(ErrorCode::argument, "split leaves an empty partition (" + std::to_string(train_count) + " of " +
                                  std::to_string(identities.size()) + " for training)");
  std::vector<int> ids(identities.begin(), identities.end());
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  DatasetSplit out;
  out.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_count), ids.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DatasetSplit split_dataset(std::span<const int> identities, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::argument, "train fraction must lie in (0, 1)");
  const auto count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(identities.size())));
  return split_dataset_count(identities, count, seed);
}

std::string format_cmc_csv(const CmcCurve& curve,
                           std::span<const std::pair<std::string, std::string>> metadata) {
  std::string out;
  for (const auto& [k, v] : metadata) out += "# " + k + "=" + v + "\n";
  out += "rank,rate\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.rates.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i + 1, curve.rates[i]);
    out += buf;
  }
  return out;
}

}  // namespace cooc
