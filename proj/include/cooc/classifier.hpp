#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cooc/core.hpp"
#include "cooc/kernels.hpp"

namespace cooc {

struct LabeledImage {
  int identity = 0;
  CodewordImage image;
};

struct PairSample {
  CoocDescriptor descriptor;
  int label = 0;  // +1 same identity, -1 different
  int probe_id = 0;
  int gallery_id = 0;
};

struct PairPlan {
  std::size_t probe = 0;    // index into the probe list
  std::size_t gallery = 0;  // index into the gallery list
  int label = 0;
};

/// Pair selection only: every cross-view positive, each followed by up to
/// neg_per_pos negatives drawn without replacement from gallery entries of
/// other identities.
std::vector<PairPlan> plan_training_pairs(std::span<const int> gallery_ids, std::span<const int> probe_ids,
                                          std::size_t neg_per_pos, std::uint64_t seed);

/// All cross-view positives, plus for each positive up to neg_per_pos
/// negatives drawn without replacement from the gallery images of other
/// identities. Descriptors are raw (not yet min-max normalized).
std::vector<PairSample> build_training_pairs(std::span<const LabeledImage> gallery,
                                             std::span<const LabeledImage> probe,
                                             std::size_t neg_per_pos, std::uint64_t seed,
                                             const SpatialKernelConfig& cfg);

/// Fits the min-max divisor on the samples and normalizes them in place.
double normalize_samples(std::vector<PairSample>& samples);

struct LinearModel {
  int codewords = 0;
  std::vector<CoocDescriptor::Entry> weights;  // sorted by (m, n); the weighting matrix
  double bias = 0.0;
  double c = 0.0;

  double score(const CoocDescriptor& d) const;
};

/// (1/2)|w|^2 + c * sum_i max(0, 1 - y_i (w . x_i + b)).
double primal_objective(const LinearModel& model, std::span<const PairSample> samples);

struct SvmTrace {
  std::vector<double> epoch_objective;  // primal objective of the averaged iterate
};

/// Pegasos subgradient descent with lambda = 1 / (c n), step 1 / (lambda t),
/// ball projection, unregularized bias and Polyak averaging of all iterates.
/// Samples are visited in a fresh seeded shuffle each epoch.
LinearModel train_svm(std::span<const PairSample> samples, double c, int epochs,
                      std::uint64_t seed, SvmTrace* trace = nullptr);

struct FoldSplit {
  std::vector<std::size_t> train;       // sample indices
  std::vector<std::size_t> validation;  // sample indices
};

/// Identity-disjoint folds: identities are shuffled and dealt round-robin;
/// a sample goes to validation when both its identities are in the fold, to
/// train when neither is, and is dropped otherwise.
std::vector<FoldSplit> identity_folds(std::span<const PairSample> samples, int folds, std::uint64_t seed);

/// c with the best mean validation accuracy; ties go to the smaller c.
double cross_validate_c(std::span<const PairSample> samples, std::span<const double> c_grid,
                        int folds, std::uint64_t seed, int epochs = 50);

double decision_score(const LinearModel& model, const CoocDescriptor& d);

// LSVM: "LSVM", M (u32 LE), bias f64, c f64, entry count (u32 LE), then
// (m u32, n u32, weight f64) triples.
std::vector<std::uint8_t> encode_model(const LinearModel& model);
LinearModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace cooc
