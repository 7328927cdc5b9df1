#pragma once

// Synthetic cross-view identities at the codeword level. View 1 is a blocky
// layout of axis-aligned rectangles; view 2 pushes every label through a
// row-stochastic codeword transform, shifts the layout by a random offset and
// flips a fraction of labels to another codeword.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cooc/classifier.hpp"

namespace cooc {

struct SynthConfig {
  int n_identities = 50;
  int width = 16;
  int height = 40;
  int codewords = 20;
  std::vector<double> transform;  // codewords x codewords, row-stochastic, row-major
  double noise = 0.05;
  int displacement = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<double> identity_transform(int codewords);
/// One-hot rows of a seeded random permutation.
std::vector<double> permutation_transform(int codewords, std::uint64_t seed);

struct SynthDataset {
  std::vector<LabeledImage> gallery;  // view 2
  std::vector<LabeledImage> probe;    // view 1
};

SynthDataset generate(const SynthConfig& cfg);

/// Writes one CWIM per image plus manifest.csv ("identity,view,path", view 1
/// = probe, view 2 = gallery, paths relative to the directory).
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace cooc
