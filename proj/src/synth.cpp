#include "cooc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace cooc {

void SynthConfig::validate() const {
  if (n_identities < 2) fail(ErrorCode::argument, "synth needs at least 2 identities");
  if (width < 1 || height < 1) fail(ErrorCode::argument, "synth grid must be non-empty");
  if (codewords < 2 || codewords > 65536) fail(ErrorCode::argument, "synth needs 2 <= M <= 65536");
  if (transform.size() != static_cast<std::size_t>(codewords) * codewords)
    fail(ErrorCode::shape, "transform must be M x M");
  for (int r = 0; r < codewords; ++r) {
    double s = 0.0;
    for (int c = 0; c < codewords; ++c) {
      const double p = transform[static_cast<std::size_t>(r) * codewords + c];
      if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorCode::argument, "transform entries must be >= 0");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) fail(ErrorCode::argument, "transform row " + std::to_string(r) + " does not sum to 1");
  }
  if (!(noise >= 0.0 && noise < 1.0)) fail(ErrorCode::argument, "noise must lie in [0, 1)");
  if (displacement < 0) fail(ErrorCode::argument, "displacement must be >= 0");
}

std::vector<double> identity_transform(int codewords) {
  std::vector<double> t(static_cast<std::size_t>(codewords) * codewords, 0.0);
  for (int i = 0; i < codewords; ++i) t[static_cast<std::size_t>(i) * codewords + i] = 1.0;
  return t;
}

std::vector<double> permutation_transform(int codewords, std::uint64_t seed) {
  std::vector<int> perm(codewords);
  for (int i = 0; i < codewords; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  std::vector<double> t(static_cast<std::size_t>(codewords) * codewords, 0.0);
  for (int i = 0; i < codewords; ++i) t[static_cast<std::size_t>(i) * codewords + perm[i]] = 1.0;
  return t;
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const int w = cfg.width, h = cfg.height, m = cfg.codewords;
  Rng rng(cfg.seed);
  auto in_range = [&](int lo, int hi) { return lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1))); };

  SynthDataset out;
  for (int id = 0; id < cfg.n_identities; ++id) {
    std::vector<std::uint16_t> view1(static_cast<std::size_t>(w) * h,
                                     static_cast<std::uint16_t>(rng.index(static_cast<std::size_t>(m))));
    const int rects = in_range(4, 8);
    for (int k = 0; k < rects; ++k) {
      const int rh = in_range(std::max(1, h / 8), std::max(1, h / 2));
      const int rw = in_range(std::max(1, w / 4), w);
      const int r0 = in_range(0, h - rh), c0 = in_range(0, w - rw);
      const auto z = static_cast<std::uint16_t>(rng.index(static_cast<std::size_t>(m)));
      for (int r = r0; r < r0 + rh; ++r)
        for (int c = c0; c < c0 + rw; ++c) view1[static_cast<std::size_t>(r) * w + c] = z;
    }

    const int dy = in_range(-cfg.displacement, cfg.displacement);
    const int dx = in_range(-cfg.displacement, cfg.displacement);
    std::vector<std::uint16_t> view2(view1.size());
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int src = view1[static_cast<std::size_t>(std::clamp(r - dy, 0, h - 1)) * w + std::clamp(c - dx, 0, w - 1)];
        const double* row = cfg.transform.data() + static_cast<std::size_t>(src) * m;
        const double u = rng.uniform();
        int z = m - 1;
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          acc += row[j];
          if (u < acc) {
            z = j;
            break;
          }
        }
        if (cfg.noise > 0.0 && rng.uniform() < cfg.noise) {
          const int other = static_cast<int>(rng.index(static_cast<std::size_t>(m - 1)));
          z = other >= z ? other + 1 : other;
        }
        view2[static_cast<std::size_t>(r) * w + c] = static_cast<std::uint16_t>(z);
      }
    }
    out.probe.push_back({id, CodewordImage(w, h, m, std::move(view1))});
    out.gallery.push_back({id, CodewordImage(w, h, m, std::move(view2))});
  }
  return out;
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create '" + dir.string() + "': " + ec.message());
  std::string manifest = "identity,view,path\n";
  auto emit = [&](const LabeledImage& li, int view) {
    char name[64];
    std::snprintf(name, sizeof name, "id%05d_v%d.cwim", li.identity, view);
    save_cwim(li.image, dir / name);
    manifest += std::to_string(li.identity) + "," + std::to_string(view) + "," + name + "\n";
  };
  for (const auto& p : data.probe) emit(p, 1);
  for (const auto& g : data.gallery) emit(g, 2);
  write_file(dir / "manifest.csv", std::span(reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()));
}

}  // namespace cooc
