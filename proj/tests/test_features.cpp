#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "cooc/features.hpp"

using namespace cooc;

namespace {

RasterImage random_raster(int w, int h, std::uint64_t seed) {
  RasterImage img(w, h);
  std::mt19937_64 gen(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

// Direct per-patch evaluation of the descriptor.
std::vector<double> patch_oracle(const RasterImage& img, int r0, int c0, int p) {
  std::vector<double> out(kPatchDescriptorDim, 0.0);
  auto px = [&](int r, int c, int ch) {
    r = std::max(0, std::min(img.height - 1, r));
    c = std::max(0, std::min(img.width - 1, c));
    return double(img.at(r, c, ch));
  };
  for (int r = r0; r < r0 + p; ++r)
    for (int c = c0; c < c0 + p; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const double gx = px(r, c + 1, ch) - px(r, c - 1, ch);
        const double gy = px(r + 1, c, ch) - px(r - 1, c, ch);
        double a = std::atan2(gy, gx);
        if (a < 0) a += 2 * std::numbers::pi;
        int bin = int(a / (2 * std::numbers::pi) * 8);
        if (bin > 7) bin = 7;
        out[ch * 12 + bin] += std::sqrt(gx * gx + gy * gy) / 255.0 / (p * p);
        out[ch * 12 + 8 + img.at(r, c, ch) / 64] += 1.0 / (p * p);
      }
  return out;
}

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

}  // namespace

TEST_CASE("dense grid size follows the valid-region formula") {
  const auto f = extract_dense(random_raster(48, 128, 1), 10, 1);
  CHECK(f.size() == 4641);
  CHECK(f.grid_height == 119);
  CHECK(f.grid_width == 39);
  CHECK(f.dim() == kPatchDescriptorDim);
  CHECK(f.center(0) == PixelLocation{5, 5});
  CHECK(f.center(1) == PixelLocation{5, 6});
  CHECK(f.center(39) == PixelLocation{6, 5});

  const auto s = extract_dense(random_raster(48, 128, 1), 10, 4);
  CHECK(s.grid_height == (128 - 10) / 4 + 1);
  CHECK(s.grid_width == (48 - 10) / 4 + 1);
  CHECK(s.center(1) == PixelLocation{5, 9});

  const auto exact = extract_dense(random_raster(10, 10, 2), 10);
  CHECK(exact.size() == 1);
}

TEST_CASE("dense features match per-patch oracle") {
  const auto img = random_raster(23, 17, 3);
  const int p = 6, s = 2;
  const auto f = extract_dense(img, p, s);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto c = f.center(i);
    const auto want = patch_oracle(img, c.row - p / 2, c.col - p / 2, p);
    const auto got = f.row(i);
    for (int k = 0; k < kPatchDescriptorDim; ++k) REQUIRE(got[k] == doctest::Approx(want[k]).epsilon(1e-12).scale(1));
  }
}

TEST_CASE("intensity bins sum to one per channel; constant image has no gradient") {
  RasterImage img(12, 12);
  std::fill(img.data.begin(), img.data.end(), 200);
  const auto f = extract_dense(img, 5);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto r = f.row(i);
    for (int ch = 0; ch < 3; ++ch) {
      for (int b = 0; b < 8; ++b) CHECK(r[ch * 12 + b] == 0.0);
      CHECK(r[ch * 12 + 8 + 3] == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("image smaller than the patch") {
  CHECK(code_of([] { extract_dense(random_raster(9, 20, 1), 10); }) == ErrorCode::shape);
  CHECK(code_of([] { extract_dense(random_raster(20, 20, 1), 0); }) == ErrorCode::argument);
}

TEST_CASE("whitening of a diagonal covariance") {
  PatchFeatures f(2);
  for (auto [a, b] : {std::pair{2.0, 1.0}, {-2.0, -1.0}, {2.0, -1.0}, {-2.0, 1.0}}) f.push_back(std::vector{a, b}, {0, 0});
  const auto st = fit_decorrelation(f, 1e-12);
  CHECK(st.mean[0] == doctest::Approx(0.0));
  CHECK(st.mean[1] == doctest::Approx(0.0));
  CHECK(st.transform[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(st.transform[1] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(st.transform[2] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(st.transform[3] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("whitened sample has identity covariance") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  PatchFeatures f(3);
  for (int i = 0; i < 2000; ++i) {
    const double a = n01(gen), b = n01(gen), c = n01(gen);
    f.push_back(std::vector{3 * a + 1, a + 0.5 * b - 2, 0.2 * a - b + 0.1 * c}, {0, 0});
  }
  const auto st = fit_decorrelation(f, 1e-10);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(st.transform[a * 3 + b] == doctest::Approx(st.transform[b * 3 + a]));
  apply_decorrelation(st, f);
  std::vector<double> mean, cov;
  sample_moments(f, mean, cov);
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(mean[a]) < 1e-9);
    for (int b = 0; b < 3; ++b) CHECK(cov[a * 3 + b] == doctest::Approx(a == b ? 1.0 : 0.0).scale(1).epsilon(1e-6));
  }
}

TEST_CASE("decorrelation errors") {
  PatchFeatures f(3);
  for (int i = 0; i < 3; ++i) f.push_back(std::vector{double(i), 1.0, 2.0}, {0, 0});
  CHECK(code_of([&] { fit_decorrelation(f); }) == ErrorCode::rank);
  f.push_back(std::vector{1.0, 2.0, 3.0}, {0, 0});
  CHECK_NOTHROW(fit_decorrelation(f));
  CHECK(code_of([&] { fit_decorrelation(f, 0.0); }) == ErrorCode::argument);
  f.push_back(std::vector<double>{1.0, std::nan(""), 3.0}, {0, 0});
  CHECK(code_of([&] { fit_decorrelation(f); }) == ErrorCode::numeric);
  const auto id = DecorrelationStats::identity(2);
  CHECK(code_of([&] { apply_decorrelation(id, PatchFeature{{1.0, 2.0, 3.0}, {}}); }) == ErrorCode::shape);
  CHECK(code_of([&] { f.push_back(std::vector{1.0}, {0, 0}); }) == ErrorCode::shape);
}

TEST_CASE("FEAT round trip restores lattice order") {
  auto f = extract_dense(random_raster(14, 13, 7), 4, 3);
  const auto bytes = encode_feat(f);
  const auto back = decode_feat(bytes);
  REQUIRE(back.size() == f.size());
  CHECK(back.grid_width == f.grid_width);
  CHECK(back.grid_height == f.grid_height);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(back.center(i) == f.center(i));
    for (int k = 0; k < f.dim(); ++k) CHECK(back.row(i)[k] == static_cast<double>(static_cast<float>(f.row(i)[k])));
  }

  // Rows stored out of order come back in row-major lattice order.
  PatchFeatures shuffled(f.dim());
  for (std::size_t i = f.size(); i-- > 0;) shuffled.push_back(f.row(i), f.center(i));
  const auto back2 = decode_feat(encode_feat(shuffled));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back2.center(i) == f.center(i));

  PatchFeatures holey(f.dim());
  for (std::size_t i = 1; i < f.size(); ++i) holey.push_back(f.row(i), f.center(i));
  CHECK(code_of([&] { decode_feat(encode_feat(holey)); }) == ErrorCode::decode);

  auto bad = bytes;
  bad.resize(bad.size() - 3);
  CHECK(code_of([&] { decode_feat(bad); }) == ErrorCode::decode);

  const auto p = std::filesystem::temp_directory_path() / "cooc_test_features.feat";
  save_feat(f, p);
  CHECK(encode_feat(load_feat(p)) == bytes);
}
