// Command-line front end; talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cooc/cooc.h"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> kernel;
  std::optional<double> sigma;
  std::optional<int> codebook_size;
  std::optional<int> trials;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::string> codebook;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--codebook-size", o.codebook_size, "number of codewords M");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.sets, "extra setting as key=value (repeatable)");
}

void add_pipeline(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--dataset", o.dataset, "manifest CSV (identity,view,path)");
  cmd->add_option("--kernel", o.kernel, "spatial kernel")
      ->check(CLI::IsMember({"identity", "rbf", "rbf-bound", "latent", "latent-bound"}));
  cmd->add_option("--sigma", o.sigma, "kernel bandwidth in pixels");
  cmd->add_option("--trials", o.trials, "number of random splits");
  cmd->add_option("--workers", o.workers, "worker threads");
}

void log_line(const char* line, void*) { std::printf("%s\n", line); }

int report(cooc_status st, const char* stage) {
  if (st == COOC_OK) return 0;
  const std::string msg = cooc_last_error();
  if (!msg.empty() && msg.front() == '[')
    std::fprintf(stderr, "cooc: %s (%s)\n", msg.c_str(), cooc_status_string(st));
  else
    std::fprintf(stderr, "cooc: [%s] %s (%s)\n", stage, msg.c_str(), cooc_status_string(st));
  return 1;
}

template <class T>
std::string text(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  } else {
    return std::to_string(v);
  }
}

int build_config(const Overrides& o, cooc_config** cfg) {
  const cooc_status st = o.config.empty() ? cooc_config_new(cfg) : cooc_config_load(o.config.c_str(), cfg);
  if (st != COOC_OK) return report(st, "config");
  std::vector<std::pair<std::string, std::string>> kv;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) kv.emplace_back(key, text(*opt));
  };
  put("seed", o.seed);
  put("kernel", o.kernel);
  put("sigma", o.sigma);
  put("codebook_size", o.codebook_size);
  put("trials", o.trials);
  put("workers", o.workers);
  put("out", o.out);
  put("dataset", o.dataset);
  put("codebook", o.codebook);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "cooc: [config] --set expects key=value, got '%s'\n", s.c_str());
      return 1;
    }
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : kv)
    if (const auto s = cooc_config_set(*cfg, k.c_str(), v.c_str()); s != COOC_OK) return report(s, "config");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual word co-occurrence person re-identification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cooc_version()));

  Overrides o;
  auto* synth = app.add_subcommand("synth", "write a synthetic two-view codeword-image dataset");
  add_common(synth, o);

  auto* train = app.add_subcommand("train-codebook", "sample patches, decorrelate and cluster into a codebook");
  add_common(train, o);
  add_pipeline(train, o);

  auto* enc = app.add_subcommand("encode", "encode every manifest image into a codeword image");
  add_common(enc, o);
  add_pipeline(enc, o);
  enc->add_option("--codebook", o.codebook, "codebook file (default <out>/codebook.cbk)");

  auto* run = app.add_subcommand("run", "train and evaluate over random splits; write cmc.csv and model.lsvm");
  add_common(run, o);
  add_pipeline(run, o);

  CLI11_PARSE(app, argc, argv);

  cooc_config* cfg = nullptr;
  if (const int rc = build_config(o, &cfg); rc != 0) {
    cooc_config_free(cfg);
    return rc;
  }
  int rc = 0;
  if (synth->parsed()) {
    rc = report(cooc_cmd_synth(cfg, log_line, nullptr), "synth");
  } else if (train->parsed()) {
    rc = report(cooc_cmd_train_codebook(cfg, log_line, nullptr), "train-codebook");
  } else if (enc->parsed()) {
    rc = report(cooc_cmd_encode(cfg, log_line, nullptr), "encode");
  } else if (run->parsed()) {
    rc = report(cooc_cmd_run(cfg, log_line, nullptr, nullptr, 0, nullptr), "run");
  }
  cooc_config_free(cfg);
  return rc;
}
