#include "cooc/core.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "binio.hpp"

namespace cooc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "I/O error";
    case ErrorCode::decode: return "decode error";
    case ErrorCode::unsupported_format: return "unsupported format";
    case ErrorCode::argument: return "argument error";
    case ErrorCode::index: return "index error";
    case ErrorCode::shape: return "shape error";
    case ErrorCode::rank: return "rank error";
    case ErrorCode::numeric: return "numeric error";
    case ErrorCode::evaluation: return "evaluation error";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

RasterImage::RasterImage(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) fail(ErrorCode::argument, "raster dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h * channels, 0);
}

CodewordImage::CodewordImage(int width, int height, int codewords,
                             std::vector<std::uint16_t> labels)
    : width_(width), height_(height), codewords_(codewords), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::argument, "codeword image dimensions must be positive");
  if (codewords < 1 || codewords > 65536)
    fail(ErrorCode::argument, "codeword count out of range: " + std::to_string(codewords));
  if (labels_.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorCode::shape, "label count " + std::to_string(labels_.size()) +
                               " does not match " + std::to_string(width) + "x" +
                               std::to_string(height));
  for (auto l : labels_)
    if (l >= codewords)
      fail(ErrorCode::index, "label " + std::to_string(l) + " >= M=" + std::to_string(codewords));
}

std::vector<PixelLocation> codeword_support(const CodewordImage& img, int z) {
  if (z < 0 || z >= img.codewords())
    fail(ErrorCode::index, "codeword " + std::to_string(z) + " outside [0, " +
                               std::to_string(img.codewords()) + ")");
  std::vector<PixelLocation> out;
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      if (img.label(r, c) == z) out.push_back({r, c});
  return out;
}

std::vector<std::vector<PixelLocation>> all_supports(const CodewordImage& img) {
  std::vector<std::vector<PixelLocation>> out(static_cast<std::size_t>(img.codewords()));
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) out[img.label(r, c)].push_back({r, c});
  return out;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) fail(ErrorCode::argument, "Rng::index on empty range");
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = next();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Rng::sample(std::size_t n, std::size_t k) {
  k = std::min(k, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + index(n - i)]);
  idx.resize(k);
  return idx;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> encode_cwim(const CodewordImage& img) {
  detail::ByteWriter w;
  w.magic("CWIM");
  w.u32(static_cast<std::uint32_t>(img.width()));
  w.u32(static_cast<std::uint32_t>(img.height()));
  w.u32(static_cast<std::uint32_t>(img.codewords()));
  for (auto l : img.labels()) w.u16(l);
  return std::move(w.bytes());
}

CodewordImage decode_cwim(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "CWIM");
  r.expect_magic("CWIM");
  const std::uint32_t w = r.u32(), h = r.u32(), m = r.u32();
  if (w == 0 || h == 0 || w > 1u << 15 || h > 1u << 15)
    fail(ErrorCode::decode, "CWIM: implausible dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  r.require(2 * n);
  std::vector<std::uint16_t> labels(n);
  for (auto& l : labels) l = r.u16();
  r.expect_end();
  try {
    return CodewordImage(static_cast<int>(w), static_cast<int>(h), static_cast<int>(m),
                         std::move(labels));
  } catch (const Error& e) {
    fail(ErrorCode::decode, std::string("CWIM: ") + e.what());
  }
}

void save_cwim(const CodewordImage& img, const std::filesystem::path& path) {
  write_file(path, encode_cwim(img));
}

CodewordImage load_cwim(const std::filesystem::path& path) {
  try {
    return decode_cwim(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw;
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace cooc
