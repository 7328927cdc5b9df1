#pragma once

// End-to-end orchestration behind the CLI subcommands.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cooc/codebook.hpp"
#include "cooc/eval.hpp"
#include "cooc/kernels.hpp"
#include "cooc/synth.hpp"

namespace cooc {

/// Ordered "key = value" settings. '#' starts a comment; blank lines are
/// ignored. Later assignments override earlier ones.
class Settings {
 public:
  static Settings parse(const std::string& text, const std::string& origin = "<config>");
  static Settings load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct PipelineConfig {
  std::filesystem::path dataset;  // manifest CSV
  std::filesystem::path out = ".";
  std::filesystem::path codebook;  // encode: codebook file (default out/codebook.cbk)
  std::filesystem::path cache_dir; // optional descriptor cache
  int patch_size = 10;
  int stride = 1;
  int codebook_size = 500;
  double sigma = 3.0;
  KernelKind kernel = KernelKind::latent_bound;
  std::size_t per_image = 1000;
  std::size_t neg_per_pos = 10;
  std::vector<double> c_grid{0.01, 0.1, 1, 10, 100};
  int folds = 3;
  int trials = 3;
  std::uint64_t seed = 1;
  int workers = 1;
  int epochs = 50;
  int kmeans_iters = 100;
  double epsilon = 1e-6;
  double train_fraction = 0.5;
  std::size_t train_count = 0;  // > 0 selects count mode
  int probe_view = 1;

  static PipelineConfig from_settings(const Settings& s);
  void validate() const;
};

/// Synth settings: identities, width, height, codebook_size, transform
/// (identity | permutation), noise, displacement, seed, out.
SynthConfig synth_config_from_settings(const Settings& s, std::filesystem::path* out_dir = nullptr);

struct ManifestEntry {
  int identity = 0;
  int view = 0;
  std::filesystem::path path;  // resolved against the manifest's directory
};

enum class InputKind { raster, features, encoded };

struct Manifest {
  std::vector<ManifestEntry> entries;
  InputKind kind = InputKind::raster;
};

/// Parses and validates: header, views in {1, 2}, files exist, one input kind,
/// every identity present in both views.
Manifest load_manifest(const std::filesystem::path& path);

using LogFn = std::function<void(const std::string&)>;

struct TrainCodebookResult {
  std::filesystem::path path;
  double objective = 0.0;
  int iterations = 0;
};

struct RunResult {
  CmcCurve curve;
  std::vector<double> chosen_c;  // per trial
  double max_value = 0.0;        // last trial
  std::filesystem::path csv_path;
  std::filesystem::path model_path;
};

TrainCodebookResult cmd_train_codebook(const PipelineConfig& cfg, const LogFn& log = {});
std::vector<std::filesystem::path> cmd_encode(const PipelineConfig& cfg, const LogFn& log = {});
RunResult cmd_run(const PipelineConfig& cfg, const LogFn& log = {});
std::filesystem::path cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                const LogFn& log = {});

}  // namespace cooc
