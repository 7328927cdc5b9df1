#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "cooc/core.hpp"

using namespace cooc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "cooc_test_core";
  fs::create_directories(dir);
  return dir / name;
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

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("codeword image validates labels and shape") {
  CHECK_NOTHROW(CodewordImage(2, 2, 3, {0, 1, 2, 0}));
  CHECK(code_of([] { CodewordImage(2, 2, 3, {0, 1, 3, 0}); }) == ErrorCode::index);
  CHECK(code_of([] { CodewordImage(2, 2, 3, {0, 1, 2}); }) == ErrorCode::shape);
  CHECK(code_of([] { CodewordImage(0, 2, 3, {}); }) == ErrorCode::argument);
}

TEST_CASE("codeword support") {
  const CodewordImage img(3, 2, 4, {1, 0, 1, 2, 1, 0});
  const auto s1 = codeword_support(img, 1);
  REQUIRE(s1.size() == 3);
  CHECK(s1[0] == PixelLocation{0, 0});
  CHECK(s1[1] == PixelLocation{0, 2});
  CHECK(s1[2] == PixelLocation{1, 1});
  CHECK(codeword_support(img, 3).empty());
  CHECK(code_of([&] { codeword_support(img, 4); }) == ErrorCode::index);
  const auto all = all_supports(img);
  REQUIRE(all.size() == 4);
  for (int z = 0; z < 4; ++z) CHECK(all[z] == codeword_support(img, z));
}

TEST_CASE("CWIM round trip is bit exact") {
  std::vector<std::uint16_t> labels(40 * 16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint16_t>((i * 7) % 300);
  const CodewordImage img(16, 40, 300, labels);
  const auto bytes = encode_cwim(img);
  CHECK(bytes.size() == 16 + 2 * labels.size());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CWIM");
  CHECK(decode_cwim(bytes) == img);
  const auto p = scratch("a.cwim");
  save_cwim(img, p);
  CHECK(load_cwim(p) == img);
  CHECK(encode_cwim(load_cwim(p)) == bytes);
}

TEST_CASE("CWIM decode errors") {
  const CodewordImage img(2, 2, 3, {0, 1, 2, 0});
  auto bytes = encode_cwim(img);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { decode_cwim(bad); }) == ErrorCode::decode);
  auto cut = bytes;
  cut.pop_back();
  CHECK(code_of([&] { decode_cwim(cut); }) == ErrorCode::decode);
  auto big = bytes;
  big[16] = 9;  // label 9 >= M
  CHECK(code_of([&] { decode_cwim(big); }) == ErrorCode::decode);
  CHECK(code_of([] { load_cwim(scratch("missing.cwim")); }) == ErrorCode::io);
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    (void)c.next();
  }
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.index(13) < 13);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  const auto s = Rng(5).sample(20, 8);
  CHECK(s.size() == 8);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 8);
  CHECK(Rng(5).sample(3, 10).size() == 3);
  CHECK(Rng(5).sample(20, 8) == s);
  std::vector<int> v{0, 1, 2, 3, 4, 5};
  Rng(9).shuffle(v);
  CHECK(std::multiset<int>(v.begin(), v.end()) == std::multiset<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("rng normal has unit moments") {
  Rng r(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("raster round trip through PPM and PNG") {
  RasterImage img(5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 17);
  for (const char* name : {"r.ppm", "r.png"}) {
    const auto p = scratch(name);
    save_image(img, p);
    const auto back = load_image(p);
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.data == img.data);
  }
  CHECK(code_of([&] { save_image(img, scratch("r.gif")); }) == ErrorCode::unsupported_format);
}

TEST_CASE("24-bit BMP, bottom-up") {
  // 2x2: top row red, green; bottom row blue, white.
  std::vector<std::uint8_t> b = {'B', 'M'};
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  u32(54 + 16);
  u32(0);
  u32(54);
  u32(40);
  u32(2);
  u32(2);
  u16(1);
  u16(24);
  u32(0);
  u32(16);
  u32(0);
  u32(0);
  u32(0);
  u32(0);
  // Bottom row first, BGR, rows padded to 8 bytes.
  for (int v : {255, 0, 0, 255, 255, 255, 0, 0}) b.push_back(static_cast<std::uint8_t>(v));
  for (int v : {0, 0, 255, 0, 255, 0, 0, 0}) b.push_back(static_cast<std::uint8_t>(v));
  const auto p = scratch("x.bmp");
  write_bytes(p, b);
  const auto img = load_image(p);
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  CHECK(img.at(0, 0, 0) == 255);
  CHECK(img.at(0, 0, 1) == 0);
  CHECK(img.at(0, 1, 1) == 255);
  CHECK(img.at(1, 0, 2) == 255);
  CHECK(img.at(1, 1, 0) == 255);
  CHECK(img.at(1, 1, 2) == 255);

  b[28] = 8;  // bits per pixel
  write_bytes(p, b);
  CHECK(code_of([&] { load_image(p); }) == ErrorCode::unsupported_format);
}

TEST_CASE("raster errors") {
  CHECK(code_of([] { load_image(scratch("none.ppm")); }) == ErrorCode::io);
  const auto gray = scratch("g.pgm");
  write_bytes(gray, {'P', '5', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 0});
  CHECK(code_of([&] { load_image(gray); }) == ErrorCode::unsupported_format);
  const auto trunc = scratch("t.ppm");
  write_bytes(trunc, {'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 1, 2, 3});
  CHECK(code_of([&] { load_image(trunc); }) == ErrorCode::decode);
  const auto junk = scratch("j.img");
  write_bytes(junk, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(code_of([&] { load_image(junk); }) == ErrorCode::decode);
}
