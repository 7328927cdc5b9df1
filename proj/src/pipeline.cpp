#include "cooc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "cooc/classifier.hpp"
#include "cooc/features.hpp"

namespace cooc {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    fail(ErrorCode::argument, "setting '" + key + "': cannot parse '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<double>(key, item));
  }
  return out;
}

const std::set<std::string> kPipelineKeys = {
    "dataset", "out", "codebook", "cache_dir", "patch_size", "stride", "codebook_size", "sigma",
    "kernel", "per_image", "neg_per_pos", "c_grid", "folds", "trials", "seed", "workers",
    "epochs", "kmeans_iters", "epsilon", "train_fraction", "train_count", "probe_view"};
const std::set<std::string> kSynthKeys = {"identities", "width", "height", "codebook_size", "transform",
                                          "noise", "displacement", "seed", "out"};

void reject_unknown(const Settings& s) {
  for (const auto& [k, _] : s.values())
    if (!kPipelineKeys.count(k) && !kSynthKeys.count(k)) fail(ErrorCode::argument, "unknown setting '" + k + "'");
}

/// Runs f, prefixing any library error with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.what());
  }
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// On-disk descriptor cache keyed by the label content of both images, the
/// kernel kind and sigma. Labels already reflect the codebook used.
class DescriptorCache {
 public:
  explicit DescriptorCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) fail(ErrorCode::io, "cannot create cache dir '" + dir_.string() + "'");
    }
  }

  bool enabled() const { return !dir_.empty(); }

  std::filesystem::path key(const CodewordImage& a, const CodewordImage& b, const SpatialKernelConfig& cfg) const {
    std::uint64_t h = fnv1a(encode_cwim(a));
    h = fnv1a(encode_cwim(b), h);
    const std::string tag = std::string(kernel_name(cfg.kind)) + "/" + std::to_string(std::bit_cast<std::uint64_t>(cfg.sigma));
    h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()), h);
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.cooc", static_cast<unsigned long long>(h));
    return dir_ / name;
  }

  std::optional<CoocDescriptor> get(const std::filesystem::path& p) const {
    std::error_code ec;
    if (!std::filesystem::exists(p, ec)) return std::nullopt;
    try {
      return decode_descriptor(read_file(p));
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  void put(const std::filesystem::path& p, const CoocDescriptor& d) const {
    auto tmp = p;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    write_file(tmp, encode_descriptor(d));
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
  }

 private:
  std::filesystem::path dir_;
};

/// Descriptors for probe/gallery image pairs with per-image embeddings built
/// lazily and kept for the lifetime of the object.
class PairDescriptors {
 public:
  PairDescriptors(const std::vector<const CodewordImage*>& probe, const std::vector<const CodewordImage*>& gallery,
                  const SpatialKernelConfig& cfg, const DescriptorCache& cache, int workers)
      : probe_(probe), gallery_(gallery), cfg_(cfg), cache_(cache), workers_(workers),
        probe_emb_(probe.size()), gallery_emb_(gallery.size()) {}

  std::vector<CoocDescriptor> compute(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<CoocDescriptor> out(pairs.size());
    std::vector<std::optional<std::filesystem::path>> keys(pairs.size());
    std::vector<char> need(pairs.size(), 1);
    if (cache_.enabled()) {
      parallel_for(pairs.size(), workers_, [&](std::size_t i) {
        keys[i] = cache_.key(*probe_[pairs[i].first], *gallery_[pairs[i].second], cfg_);
        if (auto hit = cache_.get(*keys[i])) {
          out[i] = std::move(*hit);
          need[i] = 0;
        }
      });
    }
    std::set<std::size_t> ps, gs;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (need[i]) ps.insert(pairs[i].first), gs.insert(pairs[i].second);
    embed(probe_, probe_emb_, ps);
    embed(gallery_, gallery_emb_, gs);
    parallel_for(pairs.size(), workers_, [&](std::size_t i) {
      if (!need[i]) return;
      out[i] = descriptor(*probe_emb_[pairs[i].first], *gallery_emb_[pairs[i].second]);
      if (keys[i]) cache_.put(*keys[i], out[i]);
    });
    return out;
  }

 private:
  void embed(const std::vector<const CodewordImage*>& imgs, std::vector<std::optional<ImageEmbedding>>& emb,
             const std::set<std::size_t>& which) {
    std::vector<std::size_t> todo;
    for (auto i : which)
      if (!emb[i]) todo.push_back(i);
    parallel_for(todo.size(), workers_, [&](std::size_t k) { emb[todo[k]].emplace(*imgs[todo[k]], cfg_); });
  }

  const std::vector<const CodewordImage*>& probe_;
  const std::vector<const CodewordImage*>& gallery_;
  SpatialKernelConfig cfg_;
  const DescriptorCache& cache_;
  int workers_;
  std::vector<std::optional<ImageEmbedding>> probe_emb_, gallery_emb_;
};

PatchFeatures entry_features(const ManifestEntry& e, InputKind kind, const PipelineConfig& cfg) {
  if (kind == InputKind::features) return load_feat(e.path);
  return extract_dense(load_image(e.path), cfg.patch_size, cfg.stride);
}

struct FittedCodebook {
  Codebook codebook;
  KMeansTrace trace;
};

FittedCodebook fit_codebook(const std::vector<const ManifestEntry*>& entries, InputKind kind,
                            const PipelineConfig& cfg, std::uint64_t seed) {
  if (entries.empty()) fail(ErrorCode::argument, "no images for codebook training");
  PatchSampler sampler(cfg.per_image, seed);
  for (const auto* e : entries) sampler.add(entry_features(*e, kind, cfg));
  PatchFeatures sample = sampler.take();
  const auto stats = fit_decorrelation(sample, cfg.epsilon);
  apply_decorrelation(stats, sample);
  FittedCodebook out;
  out.codebook = kmeans(sample, cfg.codebook_size, cfg.kmeans_iters, seed, &out.trace);
  out.codebook.stats = stats;
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

void emit(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

}  // namespace

Settings Settings::parse(const std::string& text, const std::string& origin) {
  Settings s;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::argument, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) fail(ErrorCode::argument, origin + ":" + std::to_string(lineno) + ": empty key");
    s.set(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()), path.string());
}

PipelineConfig PipelineConfig::from_settings(const Settings& s) {
  reject_unknown(s);
  PipelineConfig c;
  for (const auto& [k, v] : s.values()) {
    if (k == "dataset") c.dataset = v;
    else if (k == "out") c.out = v;
    else if (k == "codebook") c.codebook = v;
    else if (k == "cache_dir") c.cache_dir = v;
    else if (k == "patch_size") c.patch_size = parse_number<int>(k, v);
    else if (k == "stride") c.stride = parse_number<int>(k, v);
    else if (k == "codebook_size") c.codebook_size = parse_number<int>(k, v);
    else if (k == "sigma") c.sigma = parse_number<double>(k, v);
    else if (k == "kernel") c.kernel = parse_kernel_kind(v);
    else if (k == "per_image") c.per_image = parse_number<std::size_t>(k, v);
    else if (k == "neg_per_pos") c.neg_per_pos = parse_number<std::size_t>(k, v);
    else if (k == "c_grid") c.c_grid = parse_list(k, v);
    else if (k == "folds") c.folds = parse_number<int>(k, v);
    else if (k == "trials") c.trials = parse_number<int>(k, v);
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "workers") c.workers = parse_number<int>(k, v);
    else if (k == "epochs") c.epochs = parse_number<int>(k, v);
    else if (k == "kmeans_iters") c.kmeans_iters = parse_number<int>(k, v);
    else if (k == "epsilon") c.epsilon = parse_number<double>(k, v);
    else if (k == "train_fraction") c.train_fraction = parse_number<double>(k, v);
    else if (k == "train_count") c.train_count = parse_number<std::size_t>(k, v);
    else if (k == "probe_view") c.probe_view = parse_number<int>(k, v);
  }
  return c;
}

void PipelineConfig::validate() const {
  auto positive = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::argument, std::string(what) + " must be positive");
  };
  positive(patch_size > 0, "patch_size");
  positive(stride > 0, "stride");
  positive(codebook_size > 1, "codebook_size (>= 2)");
  positive(sigma > 0, "sigma");
  positive(per_image > 0, "per_image");
  positive(neg_per_pos > 0, "neg_per_pos");
  positive(folds > 1, "folds (>= 2)");
  positive(trials > 0, "trials");
  positive(workers > 0, "workers");
  positive(epochs > 0, "epochs");
  positive(kmeans_iters > 0, "kmeans_iters");
  positive(epsilon > 0, "epsilon");
  if (c_grid.empty()) fail(ErrorCode::argument, "c_grid is empty");
  for (double c : c_grid) positive(c > 0, "c_grid values");
  if (train_count == 0 && !(train_fraction > 0 && train_fraction < 1))
    fail(ErrorCode::argument, "train_fraction must lie in (0, 1)");
  if (probe_view != 1 && probe_view != 2) fail(ErrorCode::argument, "probe_view must be 1 or 2");
  SpatialKernelConfig{kernel, sigma}.validate();
}

SynthConfig synth_config_from_settings(const Settings& s, std::filesystem::path* out_dir) {
  reject_unknown(s);
  SynthConfig c;
  std::string transform = "permutation";
  for (const auto& [k, v] : s.values()) {
    if (k == "identities") c.n_identities = parse_number<int>(k, v);
    else if (k == "width") c.width = parse_number<int>(k, v);
    else if (k == "height") c.height = parse_number<int>(k, v);
    else if (k == "codebook_size") c.codewords = parse_number<int>(k, v);
    else if (k == "transform") transform = v;
    else if (k == "noise") c.noise = parse_number<double>(k, v);
    else if (k == "displacement") c.displacement = parse_number<int>(k, v);
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "out" && out_dir) *out_dir = v;
  }
  if (c.codewords < 2 || c.codewords > 65536) fail(ErrorCode::argument, "codebook_size must lie in [2, 65536]");
  if (transform == "identity") c.transform = identity_transform(c.codewords);
  else if (transform == "permutation") c.transform = permutation_transform(c.codewords, c.seed ^ 0x9e3779b97f4a7c15ull);
  else fail(ErrorCode::argument, "transform must be 'identity' or 'permutation', got '" + transform + "'");
  c.validate();
  return c;
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (path.empty()) fail(ErrorCode::argument, "no dataset manifest configured");
  if (!std::filesystem::exists(path)) fail(ErrorCode::io, "dataset manifest '" + path.string() + "' not found");
  const auto bytes = read_file(path);
  std::stringstream ss(std::string(bytes.begin(), bytes.end()));
  const auto base = path.parent_path();
  std::string line;
  int lineno = 0;
  Manifest m;
  std::set<InputKind> kinds;
  std::map<int, std::set<int>> views;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 || m.entries.empty()) {
      std::string header = line;
      header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
      if (header == "identity,view,path") continue;
      if (lineno == 1) fail(ErrorCode::decode, path.string() + ": expected header 'identity,view,path'");
    }
    const auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      fail(ErrorCode::decode, path.string() + ":" + std::to_string(lineno) + ": expected 'identity,view,path'");
    ManifestEntry e;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    e.identity = parse_number<int>(where + " identity", trim(line.substr(0, c1)));
    e.view = parse_number<int>(where + " view", trim(line.substr(c1 + 1, c2 - c1 - 1)));
    if (e.view != 1 && e.view != 2) fail(ErrorCode::decode, where + ": view must be 1 or 2");
    e.path = trim(line.substr(c2 + 1));
    if (e.path.is_relative()) e.path = base / e.path;
    if (!std::filesystem::exists(e.path)) fail(ErrorCode::io, where + ": no such file '" + e.path.string() + "'");
    std::string ext = e.path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    kinds.insert(ext == ".cwim" ? InputKind::encoded : ext == ".feat" ? InputKind::features : InputKind::raster);
    views[e.identity].insert(e.view);
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) fail(ErrorCode::argument, path.string() + ": manifest lists no images");
  if (kinds.size() != 1) fail(ErrorCode::argument, path.string() + ": manifest mixes input kinds (raster, FEAT, CWIM)");
  m.kind = *kinds.begin();
  for (const auto& [id, v] : views)
    if (v.size() != 2) fail(ErrorCode::argument, path.string() + ": identity " + std::to_string(id) + " lacks one view");
  return m;
}

TrainCodebookResult cmd_train_codebook(const PipelineConfig& cfg, const LogFn& log) {
  stage("config", [&] { cfg.validate(); });
  const auto manifest = stage("ingest", [&] { return load_manifest(cfg.dataset); });
  if (manifest.kind == InputKind::encoded)
    throw Error(ErrorCode::argument, "[ingest] manifest holds encoded images; codebook training needs rasters or FEAT files");
  std::vector<const ManifestEntry*> all;
  for (const auto& e : manifest.entries) all.push_back(&e);
  const auto fitted = stage("codebook", [&] { return fit_codebook(all, manifest.kind, cfg, cfg.seed); });
  TrainCodebookResult r;
  r.path = cfg.out / "codebook.cbk";
  stage("write", [&] {
    std::filesystem::create_directories(cfg.out);
    save_codebook(fitted.codebook, r.path);
  });
  r.objective = fitted.trace.objective.back();
  r.iterations = fitted.trace.iterations;
  emit(log, "codebook: M=" + std::to_string(fitted.codebook.codewords) + " D=" + std::to_string(fitted.codebook.dim) +
                " iterations=" + std::to_string(r.iterations) + " objective=" + fmt_double(r.objective));
  emit(log, "wrote " + r.path.string());
  return r;
}

std::vector<std::filesystem::path> cmd_encode(const PipelineConfig& cfg, const LogFn& log) {
  stage("config", [&] { cfg.validate(); });
  const auto manifest = stage("ingest", [&] { return load_manifest(cfg.dataset); });
  if (manifest.kind == InputKind::encoded)
    throw Error(ErrorCode::argument, "[ingest] manifest already holds encoded images");
  const auto cb_path = cfg.codebook.empty() ? cfg.out / "codebook.cbk" : cfg.codebook;
  const auto cb = stage("codebook", [&] { return load_codebook(cb_path); });

  std::vector<std::filesystem::path> outputs(manifest.entries.size());
  std::set<std::string> names;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const std::string name = "v" + std::to_string(e.view) + "_" + e.path.stem().string() + ".cwim";
    if (!names.insert(name).second)
      throw Error(ErrorCode::argument, "[encode] two inputs map to output name '" + name + "'");
    outputs[i] = cfg.out / name;
  }
  stage("encode", [&] {
    std::filesystem::create_directories(cfg.out);
    parallel_for(manifest.entries.size(), cfg.workers, [&](std::size_t i) {
      save_cwim(encode(cb, entry_features(manifest.entries[i], manifest.kind, cfg)), outputs[i]);
    });
    std::string csv = "identity,view,path\n";
    for (std::size_t i = 0; i < outputs.size(); ++i)
      csv += std::to_string(manifest.entries[i].identity) + "," + std::to_string(manifest.entries[i].view) + "," +
             outputs[i].filename().string() + "\n";
    write_file(cfg.out / "manifest.csv", std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  });
  emit(log, "encoded " + std::to_string(outputs.size()) + " images with M=" + std::to_string(cb.codewords) + " into " +
                cfg.out.string());
  return outputs;
}

RunResult cmd_run(const PipelineConfig& cfg, const LogFn& log) {
  stage("config", [&] { cfg.validate(); });
  const auto manifest = stage("ingest", [&] { return load_manifest(cfg.dataset); });
  const SpatialKernelConfig kcfg{cfg.kernel, cfg.sigma};
  const DescriptorCache cache(cfg.cache_dir);

  std::vector<CodewordImage> encoded;
  if (manifest.kind == InputKind::encoded) {
    encoded = stage("ingest", [&] {
      std::vector<CodewordImage> v(manifest.entries.size());
      parallel_for(v.size(), cfg.workers, [&](std::size_t i) { v[i] = load_cwim(manifest.entries[i].path); });
      for (const auto& img : v)
        if (img.codewords() != v.front().codewords())
          fail(ErrorCode::argument, "encoded images use different codebook sizes");
      return v;
    });
  }
  std::vector<int> identities;
  for (const auto& e : manifest.entries) identities.push_back(e.identity);
  std::sort(identities.begin(), identities.end());
  identities.erase(std::unique(identities.begin(), identities.end()), identities.end());

  std::vector<CmcCurve> curves;
  RunResult result;
  LinearModel last_model;
  std::optional<Codebook> last_codebook;
  int codewords = manifest.kind == InputKind::encoded ? encoded.front().codewords() : cfg.codebook_size;

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    const auto split = stage("split", [&] {
      return cfg.train_count > 0 ? split_dataset_count(identities, cfg.train_count, seed)
                                 : split_dataset(identities, cfg.train_fraction, seed);
    });
    const std::set<int> train_ids(split.train.begin(), split.train.end());

    if (manifest.kind != InputKind::encoded) {
      std::vector<const ManifestEntry*> train_entries;
      for (const auto& e : manifest.entries)
        if (train_ids.count(e.identity)) train_entries.push_back(&e);
      auto fitted = stage("codebook", [&] { return fit_codebook(train_entries, manifest.kind, cfg, seed); });
      encoded = stage("encode", [&] {
        std::vector<CodewordImage> v(manifest.entries.size());
        parallel_for(v.size(), cfg.workers, [&](std::size_t i) {
          v[i] = encode(fitted.codebook, entry_features(manifest.entries[i], manifest.kind, cfg));
        });
        return v;
      });
      emit(log, "trial " + std::to_string(trial + 1) + ": codebook objective " + fmt_double(fitted.trace.objective.back()));
      last_codebook = std::move(fitted.codebook);
    }

    // Partition images by split side and view.
    std::vector<const CodewordImage*> train_probe, train_gallery, test_probe, test_gallery;
    std::vector<int> train_probe_ids, train_gallery_ids, test_probe_ids, test_gallery_ids;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      const bool is_probe = e.view == cfg.probe_view;
      const bool is_train = train_ids.count(e.identity) != 0;
      (is_train ? (is_probe ? train_probe : train_gallery) : (is_probe ? test_probe : test_gallery)).push_back(&encoded[i]);
      (is_train ? (is_probe ? train_probe_ids : train_gallery_ids) : (is_probe ? test_probe_ids : test_gallery_ids))
          .push_back(e.identity);
    }

    auto samples = stage("pairs", [&] {
      const auto plan = plan_training_pairs(train_gallery_ids, train_probe_ids, cfg.neg_per_pos, seed);
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (const auto& p : plan) pairs.emplace_back(p.probe, p.gallery);
      PairDescriptors source(train_probe, train_gallery, kcfg, cache, cfg.workers);
      auto descs = source.compute(pairs);
      std::vector<PairSample> out(plan.size());
      for (std::size_t i = 0; i < plan.size(); ++i)
        out[i] = {std::move(descs[i]), plan[i].label, train_probe_ids[plan[i].probe], train_gallery_ids[plan[i].gallery]};
      return out;
    });
    const double max_value = stage("normalize", [&] { return normalize_samples(samples); });
    const double c = stage("cross-validate", [&] { return cross_validate_c(samples, cfg.c_grid, cfg.folds, seed, cfg.epochs); });
    const auto model = stage("train", [&] { return train_svm(samples, c, cfg.epochs, seed); });

    const auto curve = stage("evaluate", [&] {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t p = 0; p < test_probe.size(); ++p)
        for (std::size_t g = 0; g < test_gallery.size(); ++g) pairs.emplace_back(p, g);
      PairDescriptors source(test_probe, test_gallery, kcfg, cache, cfg.workers);
      const auto descs = source.compute(pairs);
      std::vector<RankingResult> rankings(test_probe.size());
      parallel_for(test_probe.size(), cfg.workers, [&](std::size_t p) {
        std::vector<std::pair<int, double>> scores;
        for (std::size_t g = 0; g < test_gallery.size(); ++g)
          scores.emplace_back(test_gallery_ids[g],
                              decision_score(model, minmax_apply(descs[p * test_gallery.size() + g], max_value)));
        rankings[p] = rank_scores(test_probe_ids[p], scores);
      });
      return cmc(rankings);
    });
    emit(log, "trial " + std::to_string(trial + 1) + "/" + std::to_string(cfg.trials) + ": train=" +
                  std::to_string(split.train.size()) + " test=" + std::to_string(split.test.size()) + " pairs=" +
                  std::to_string(samples.size()) + " c=" + fmt_short(c) + " rank-1=" + percent(curve.at_rank(1)));
    curves.push_back(curve);
    result.chosen_c.push_back(c);
    result.max_value = max_value;
    last_model = model;
  }

  result.curve = stage("aggregate", [&] { return average_trials(curves); });
  std::string cs;
  for (double c : result.chosen_c) cs += (cs.empty() ? "" : ";") + fmt_short(c);
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"kernel", std::string(kernel_name(cfg.kernel))},
      {"sigma", fmt_short(cfg.sigma)},
      {"M", std::to_string(codewords)},
      {"c", cs},
      {"trials", std::to_string(result.curve.trials)},
      {"seed", std::to_string(cfg.seed)},
      {"max_value", fmt_double(result.max_value)},
  };
  result.csv_path = cfg.out / "cmc.csv";
  result.model_path = cfg.out / "model.lsvm";
  stage("write", [&] {
    std::filesystem::create_directories(cfg.out);
    const auto csv = format_cmc_csv(result.curve, meta);
    write_file(result.csv_path, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    save_model(last_model, result.model_path);
    if (last_codebook) save_codebook(*last_codebook, cfg.out / "codebook.cbk");
  });
  emit(log, "CMC over " + std::to_string(result.curve.trials) + " trials: rank-1 " + percent(result.curve.at_rank(1)) +
                "  rank-5 " + percent(result.curve.at_rank(5)) + "  rank-10 " + percent(result.curve.at_rank(10)) +
                "  rank-15 " + percent(result.curve.at_rank(15)));
  emit(log, "wrote " + result.csv_path.string() + " and " + result.model_path.string());
  return result;
}

std::filesystem::path cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir, const LogFn& log) {
  const auto data = stage("synth", [&] { return generate(cfg); });
  stage("write", [&] { write_dataset(data, out_dir); });
  emit(log, "synthesized " + std::to_string(cfg.n_identities) + " identities (" + std::to_string(cfg.height) + "x" +
                std::to_string(cfg.width) + ", M=" + std::to_string(cfg.codewords) + ") into " + out_dir.string());
  return out_dir / "manifest.csv";
}

}  // namespace cooc
