#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>
#include <set>

#include "cooc/codebook.hpp"
#include "oracles.hpp"

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

PatchFeatures blobs(int per, int k, int dim, double spread, std::uint64_t seed, std::vector<std::vector<double>>* pts) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  PatchFeatures f(dim);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < per; ++i) {
      std::vector<double> v(dim);
      for (int d = 0; d < dim; ++d) v[d] = 20.0 * c * (d == 0 ? 1 : 0) + spread * n01(gen);
      f.push_back(v, {0, 0});
      if (pts) pts->push_back(v);
    }
  return f;
}

}  // namespace

TEST_CASE("planted clusters reach the closed-form optimum") {
  std::vector<std::vector<double>> pts;
  const auto f = blobs(50, 2, 3, 1.0, 3, &pts);
  // Closed form: each cluster's own mean.
  std::vector<std::vector<double>> means(2, std::vector<double>(3, 0.0));
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 50; ++i)
      for (int d = 0; d < 3; ++d) means[c][d] += pts[c * 50 + i][d] / 50.0;
  }
  const double optimum = oracle::sse(pts, means);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    KMeansTrace tr;
    const auto cb = kmeans(f, 2, 100, seed, &tr);
    CHECK(tr.converged);
    CHECK(std::abs(tr.objective.back() - optimum) <= 1e-9 * std::max(1.0, optimum));
    CHECK(std::abs(kmeans_objective(cb, f) - optimum) <= 1e-9 * std::max(1.0, optimum));
  }
}

TEST_CASE("k-means objective never increases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = blobs(40, 5, 4, 8.0, 100 + seed, nullptr);
    KMeansTrace tr;
    kmeans(f, 7, 200, seed, &tr);
    for (std::size_t i = 1; i < tr.objective.size(); ++i) CHECK(tr.objective[i] <= tr.objective[i - 1]);
  }
}

TEST_CASE("k-means is deterministic under seed") {
  const auto f = blobs(30, 3, 2, 3.0, 9, nullptr);
  CHECK(kmeans(f, 4, 50, 1).centroids == kmeans(f, 4, 50, 1).centroids);
}

TEST_CASE("k-means errors") {
  const auto f = blobs(3, 1, 2, 1.0, 1, nullptr);
  CHECK(code_of([&] { kmeans(f, 4, 10, 1); }) == ErrorCode::argument);
  PatchFeatures same(2);
  for (int i = 0; i < 5; ++i) same.push_back(std::vector{1.0, 1.0}, {0, 0});
  CHECK(code_of([&] { kmeans(same, 2, 10, 1); }) == ErrorCode::argument);
  CHECK(code_of([&] { kmeans(f, 1, 10, 1); }) == ErrorCode::argument);
}

TEST_CASE("nearest centroid breaks ties toward the lowest index") {
  Codebook cb;
  cb.codewords = 3;
  cb.dim = 1;
  cb.centroids = {2.0, 0.0, 2.0};
  cb.stats = DecorrelationStats::identity(1);
  CHECK(cb.nearest(std::vector{1.0}) == 0);
  CHECK(cb.nearest(std::vector{2.0}) == 0);
  CHECK(cb.nearest(std::vector{-1.0}) == 1);
  CHECK(code_of([&] { cb.nearest(std::vector{1.0, 2.0}); }) == ErrorCode::shape);
}

TEST_CASE("encode labels every patch with its nearest centroid") {
  Codebook cb;
  cb.codewords = 10;
  cb.dim = 2;
  for (int m = 0; m < 10; ++m) {
    cb.centroids.push_back(m);
    cb.centroids.push_back(-m);
  }
  cb.stats = DecorrelationStats::identity(2);
  PatchFeatures f(2);
  f.grid_width = 3;
  f.grid_height = 2;
  for (int i = 0; i < 6; ++i) f.push_back(std::vector{7.0, -7.0}, {i / 3, i % 3});
  const auto img = encode(cb, f);
  CHECK(img.width() == 3);
  CHECK(img.height() == 2);
  for (auto l : img.labels()) CHECK(l == 7);

  f.grid_width = 0;
  CHECK(code_of([&] { encode(cb, f); }) == ErrorCode::shape);
  PatchFeatures g(3);
  g.grid_width = g.grid_height = 1;
  g.push_back(std::vector{1.0, 2.0, 3.0}, {0, 0});
  CHECK(code_of([&] { encode(cb, g); }) == ErrorCode::shape);
}

TEST_CASE("raster encoding covers the valid region") {
  RasterImage img(20, 30);
  std::mt19937_64 gen(1);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(gen());
  const auto f = extract_dense(img, 10, 1);
  auto sample = sample_features(std::span(&f, 1), 200, 1);
  const auto st = fit_decorrelation(sample);
  apply_decorrelation(st, sample);
  auto cb = kmeans(sample, 8, 50, 1);
  cb.stats = st;
  const auto enc = encode(cb, img, 10);
  CHECK(enc.height() == 21);
  CHECK(enc.width() == 11);
  CHECK(enc.codewords() == 8);
  for (auto l : enc.labels()) CHECK(l < 8);
  CHECK(encode(cb, img, 10) == enc);
}

TEST_CASE("patch sampling draws without replacement per image") {
  std::vector<PatchFeatures> imgs;
  for (int k = 0; k < 3; ++k) {
    PatchFeatures f(1);
    for (int i = 0; i < 10 + k; ++i) f.push_back(std::vector{100.0 * k + i}, {0, i});
    imgs.push_back(f);
  }
  const auto s = sample_features(imgs, 5, 3);
  CHECK(s.size() == 15);
  std::set<double> seen;
  for (std::size_t i = 0; i < s.size(); ++i) seen.insert(s.row(i)[0]);
  CHECK(seen.size() == 15);
  CHECK(sample_features(imgs, 50, 3).size() == 33);
  const auto again = sample_features(imgs, 5, 3);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(again.row(i)[0] == s.row(i)[0]);
}

TEST_CASE("CBK1 round trip") {
  const auto f = blobs(20, 3, 4, 2.0, 4, nullptr);
  auto cb = kmeans(f, 3, 20, 2);
  cb.stats = fit_decorrelation(f);
  const auto bytes = encode_codebook(cb);
  CHECK(bytes.size() == 12 + 8 * (3 * 4 + 4 + 16));
  const auto back = decode_codebook(bytes);
  CHECK(back.centroids == cb.centroids);
  CHECK(back.stats.mean == cb.stats.mean);
  CHECK(back.stats.transform == cb.stats.transform);
  auto bad = bytes;
  bad.push_back(0);
  CHECK(code_of([&] { decode_codebook(bad); }) == ErrorCode::decode);
  bad = bytes;
  bad[1] = 'X';
  CHECK(code_of([&] { decode_codebook(bad); }) == ErrorCode::decode);
  const auto p = std::filesystem::temp_directory_path() / "cooc_test_codebook.cbk";
  save_codebook(cb, p);
  CHECK(encode_codebook(load_codebook(p)) == bytes);
}
