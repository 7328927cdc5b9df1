#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cooc/classifier.hpp"
#include "cooc/kernels.hpp"

namespace cooc {

struct RankedIdentity {
  int identity = 0;
  double score = 0.0;
};

struct RankingResult {
  int probe_id = 0;
  std::vector<RankedIdentity> ordered_gallery;  // score descending, ties by identity ascending
};

/// Averages per-image decision scores per gallery identity, then ranks.
RankingResult rank_scores(int probe_id, std::span<const std::pair<int, double>> image_scores);

/// Scores the probe against every gallery image (descriptor -> min-max ->
/// linear model), averages per identity and ranks.
RankingResult rank_probe(const LinearModel& model, const CodewordImage& probe, int probe_id,
                         std::span<const LabeledImage> gallery, const SpatialKernelConfig& cfg,
                         double max_value);
/// Same, with embeddings prepared by the caller.
RankingResult rank_probe(const LinearModel& model, const ImageEmbedding& probe, int probe_id,
                         std::span<const ImageEmbedding> gallery, std::span<const int> gallery_ids,
                         double max_value);

struct CmcCurve {
  std::vector<double> rates;  // rates[r - 1] for rank r = 1..G
  int trials = 1;

  double at_rank(std::size_t r) const { return rates.at(std::min(r, rates.size()) - 1); }
};

CmcCurve cmc(std::span<const RankingResult> results);
CmcCurve average_trials(std::span<const CmcCurve> curves);

struct DatasetSplit {
  std::vector<int> train;  // ascending
  std::vector<int> test;   // ascending
};

/// Identity-disjoint random split; the train side gets round(fraction * n).
DatasetSplit split_dataset(std::span<const int> identities, double train_fraction, std::uint64_t seed);
/// Same with an explicit train count.
DatasetSplit split_dataset_count(std::span<const int> identities, std::size_t train_count, std::uint64_t seed);

/// "# key=value" metadata lines, then "rank,rate" rows.
std::string format_cmc_csv(const CmcCurve& curve,
                           std::span<const std::pair<std::string, std::string>> metadata);

}  // namespace cooc
