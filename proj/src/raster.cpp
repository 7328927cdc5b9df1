#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include "cooc/core.hpp"

namespace cooc {
namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

// Netpbm header token, skipping whitespace and '#' comments.
std::string pnm_token(std::span<const std::uint8_t> b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#')
    tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

int parse_positive(const std::string& tok, const std::string& what) {
  if (tok.empty() || tok.size() > 9 ||
      !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    fail(ErrorCode::decode, "PPM: bad " + what + " '" + tok + "'");
  const int v = std::stoi(tok);
  if (v <= 0) fail(ErrorCode::decode, "PPM: non-positive " + what);
  return v;
}

RasterImage decode_ppm(std::span<const std::uint8_t> b) {
  std::size_t pos = 0;
  const std::string magic = pnm_token(b, pos);
  if (magic == "P5" || magic == "P2" || magic == "P1" || magic == "P4")
    fail(ErrorCode::unsupported_format, "PPM: only 3-channel (P6) rasters are supported, got " + magic);
  if (magic != "P6") fail(ErrorCode::decode, "PPM: bad magic '" + magic + "'");
  const int w = parse_positive(pnm_token(b, pos), "width");
  const int h = parse_positive(pnm_token(b, pos), "height");
  const int maxval = parse_positive(pnm_token(b, pos), "maxval");
  if (maxval != 255) fail(ErrorCode::unsupported_format, "PPM: only 8-bit (maxval 255) supported");
  if (pos >= b.size() || !std::isspace(b[pos])) fail(ErrorCode::decode, "PPM: truncated header");
  ++pos;
  RasterImage img(w, h);
  if (b.size() - pos < img.data.size()) fail(ErrorCode::decode, "PPM: truncated pixel data");
  std::memcpy(img.data.data(), b.data() + pos, img.data.size());
  return img;
}

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

RasterImage decode_bmp(std::span<const std::uint8_t> b) {
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') fail(ErrorCode::decode, "BMP: bad header");
  const std::uint32_t offset = le32(b, 10);
  const auto w = static_cast<std::int32_t>(le32(b, 18));
  const auto h_raw = static_cast<std::int32_t>(le32(b, 22));
  const int bpp = b[28] | (b[29] << 8);
  const std::uint32_t compression = le32(b, 30);
  if (bpp != 24) fail(ErrorCode::unsupported_format, "BMP: only 24-bit RGB supported, got " + std::to_string(bpp) + "-bit");
  if (compression != 0) fail(ErrorCode::unsupported_format, "BMP: compressed bitmaps not supported");
  if (w <= 0 || h_raw == 0 || h_raw == INT32_MIN) fail(ErrorCode::decode, "BMP: bad dimensions");
  const bool top_down = h_raw < 0;
  const int h = top_down ? -h_raw : h_raw;
  const std::size_t stride = (static_cast<std::size_t>(w) * 3 + 3) / 4 * 4;
  if (offset > b.size() || b.size() - offset < stride * h) fail(ErrorCode::decode, "BMP: truncated pixel data");
  RasterImage img(w, h);
  for (int r = 0; r < h; ++r) {
    const std::size_t src_row = top_down ? r : h - 1 - r;
    const std::uint8_t* src = b.data() + offset + src_row * stride;
    for (int c = 0; c < w; ++c) {
      img.at(r, c, 0) = src[3 * c + 2];
      img.at(r, c, 1) = src[3 * c + 1];
      img.at(r, c, 2) = src[3 * c + 0];
    }
  }
  return img;
}

RasterImage decode_png(std::span<const std::uint8_t> b) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, b.data(), b.size()))
    fail(ErrorCode::decode, std::string("PNG: ") + png.message);
  const auto format = png.format;
  if (!(format & PNG_FORMAT_FLAG_COLOR) || (format & PNG_FORMAT_FLAG_ALPHA) ||
      (format & PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&png);
    fail(ErrorCode::unsupported_format, "PNG: only 8-bit 3-channel RGB supported");
  }
  png.format = PNG_FORMAT_RGB;
  RasterImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr))
    fail(ErrorCode::decode, std::string("PNG: ") + png.message);
  return img;
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::io, "no such file '" + path.string() + "'");
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
      return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return decode_bmp(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
  fail(ErrorCode::decode, path.string() + ": unrecognized raster format");
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * RasterImage::channels)
    fail(ErrorCode::shape, "raster data length does not match dimensions");
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") {
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.data.begin(), img.data.end());
    write_file(path, bytes);
  } else if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.data.data(), 0, nullptr))
      fail(ErrorCode::io, "PNG write failed for '" + path.string() + "': " + png.message);
  } else {
    fail(ErrorCode::unsupported_format, "cannot save raster as '" + ext + "' (use .ppm or .png)");
  }
}

}  // namespace cooc
