#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "cooc/kernels.hpp"
#include "cooc/synth.hpp"

using namespace cooc;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::io;
}

SynthConfig base(int m = 20) {
  SynthConfig c;
  c.codewords = m;
  c.transform = permutation_transform(m, 99);
  return c;
}

bool matches_shift(const CodewordImage& a, const CodewordImage& b, int dy, int dx) {
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      const int sr = std::clamp(r - dy, 0, a.height() - 1), sc = std::clamp(c - dx, 0, a.width() - 1);
      if (b.label(r, c) != a.label(sr, sc)) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("transforms are row-stochastic") {
  for (const auto& t : {identity_transform(7), permutation_transform(7, 3)}) {
    for (int r = 0; r < 7; ++r) {
      double s = 0;
      int ones = 0;
      for (int c = 0; c < 7; ++c) {
        s += t[r * 7 + c];
        ones += t[r * 7 + c] == 1.0;
      }
      CHECK(s == 1.0);
      CHECK(ones == 1);
    }
  }
  CHECK(permutation_transform(7, 3) == permutation_transform(7, 3));
}

TEST_CASE("generation is deterministic under seed") {
  const auto a = generate(base()), b = generate(base());
  REQUIRE(a.probe.size() == 50);
  for (std::size_t i = 0; i < a.probe.size(); ++i) {
    CHECK(a.probe[i].image == b.probe[i].image);
    CHECK(a.gallery[i].image == b.gallery[i].image);
    CHECK(a.probe[i].identity == int(i));
    CHECK(a.gallery[i].identity == int(i));
    CHECK(a.probe[i].image.height() == 40);
    CHECK(a.probe[i].image.width() == 16);
  }
  auto other = base();
  other.seed = 2;
  CHECK(!(generate(other).probe[0].image == a.probe[0].image));
}

TEST_CASE("identity transform without noise or displacement copies view 1") {
  auto c = base();
  c.transform = identity_transform(20);
  c.noise = 0;
  c.displacement = 0;
  const auto d = generate(c);
  for (std::size_t i = 0; i < d.probe.size(); ++i) CHECK(d.probe[i].image == d.gallery[i].image);
}

TEST_CASE("displacement is a clamped translation within range") {
  auto c = base();
  c.transform = identity_transform(20);
  c.noise = 0;
  c.displacement = 2;
  const auto d = generate(c);
  for (std::size_t i = 0; i < d.probe.size(); ++i) {
    bool found = false;
    for (int dy = -2; dy <= 2 && !found; ++dy)
      for (int dx = -2; dx <= 2 && !found; ++dx) found = matches_shift(d.probe[i].image, d.gallery[i].image, dy, dx);
    CHECK(found);
  }
}

TEST_CASE("permutation with noise flips about the configured fraction") {
  auto c = base();
  c.displacement = 0;
  c.n_identities = 200;
  const auto d = generate(c);
  std::vector<int> perm(20);
  for (int m = 0; m < 20; ++m)
    for (int n = 0; n < 20; ++n)
      if (c.transform[m * 20 + n] == 1.0) perm[m] = n;
  std::size_t flipped = 0, total = 0;
  for (std::size_t i = 0; i < d.probe.size(); ++i) {
    const auto a = d.probe[i].image.labels(), b = d.gallery[i].image.labels();
    for (std::size_t k = 0; k < a.size(); ++k) flipped += b[k] != perm[a[k]];
    total += a.size();
  }
  const double rate = double(flipped) / double(total);
  CHECK(rate == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("near-total noise decorrelates the views") {
  auto c = base();
  c.transform = identity_transform(20);
  c.noise = 0.999;
  c.displacement = 0;
  const auto d = generate(c);
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < d.probe.size(); ++i) {
    const auto a = d.probe[i].image.labels(), b = d.gallery[i].image.labels();
    for (std::size_t k = 0; k < a.size(); ++k) same += a[k] == b[k];
    total += a.size();
  }
  CHECK(double(same) / double(total) < 0.01);
}

TEST_CASE("regions are axis-aligned blocks") {
  const auto d = generate(base());
  for (const auto& p : d.probe) {
    std::set<int> used(p.image.labels().begin(), p.image.labels().end());
    CHECK(used.size() >= 1);
    CHECK(used.size() <= 9);
  }
}

TEST_CASE("positive latent-bound descriptor dominates a disjoint negative") {
  auto c = base(40);
  c.transform = identity_transform(40);
  c.noise = 0;
  c.displacement = 0;
  c.n_identities = 20;
  const auto d = generate(c);
  const SpatialKernelConfig cfg{KernelKind::latent_bound, 3.0};
  for (std::size_t i = 0; i + 1 < d.probe.size(); ++i) {
    const auto& a = d.probe[i].image;
    // Negative partner: the next identity's layout relabeled onto codewords a does not use.
    std::set<int> used(a.labels().begin(), a.labels().end());
    std::vector<std::uint16_t> free_codes;
    for (int z = 0; z < 40; ++z)
      if (!used.count(z)) free_codes.push_back(static_cast<std::uint16_t>(z));
    const auto& src = d.gallery[i + 1].image;
    std::vector<std::uint16_t> relabeled(src.labels().begin(), src.labels().end());
    for (auto& l : relabeled) l = free_codes[l % free_codes.size()];
    const CodewordImage neg(src.width(), src.height(), 40, relabeled);

    const auto pos_d = descriptor(a, d.gallery[i].image, cfg);
    const auto neg_d = descriptor(a, neg, cfg);
    bool strict = false;
    for (int m = 0; m < 40; ++m) {
      CHECK(pos_d.value(m, m) >= neg_d.value(m, m));
      strict = strict || pos_d.value(m, m) > neg_d.value(m, m);
    }
    CHECK(strict);
  }
}

TEST_CASE("config validation") {
  auto c = base();
  c.noise = 1.0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::argument);
  c = base();
  c.displacement = -1;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::argument);
  c = base();
  c.transform[0] += 0.5;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::argument);
  c = base();
  c.transform.pop_back();
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::shape);
}

TEST_CASE("dataset files and manifest") {
  auto c = base();
  c.n_identities = 3;
  const auto d = generate(c);
  const auto dir = std::filesystem::temp_directory_path() / "cooc_test_synth";
  std::filesystem::remove_all(dir);
  write_dataset(d, dir);
  const auto bytes = read_file(dir / "manifest.csv");
  const std::string text(bytes.begin(), bytes.end());
  CHECK(text.rfind("identity,view,path\n", 0) == 0);
  CHECK(text.find("0,1,id00000_v1.cwim\n") != std::string::npos);
  CHECK(text.find("2,2,id00002_v2.cwim\n") != std::string::npos);
  CHECK(load_cwim(dir / "id00001_v1.cwim") == d.probe[1].image);
  CHECK(load_cwim(dir / "id00001_v2.cwim") == d.gallery[1].image);
}
