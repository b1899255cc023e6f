#include "percdepth/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace percdepth::io {

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("cannot write " + path.string());
}

void require_image(const Tensor& image, const char* what) {
  if (image.n() != 1 || (image.c() != 1 && image.c() != 3) || image.h() < 1 || image.w() < 1) {
    throw ShapeError(std::string(what) + ": expected one 1- or 3-channel image, got " +
                     to_string(image.shape()));
  }
}

struct PngReader {
  const std::vector<unsigned char>* bytes;
  std::size_t pos = 0;
  std::string file;
  std::string error;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size()) {
    r->error = "unexpected end of data";
    png_error(png, "truncated");
  }
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r && r->error.empty()) r->error = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Tensor read_png(const fs::path& path) {
  const auto bytes = read_bytes(path);
  PngReader reader{&bytes, 0, path.string(), {}};
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ParseError(path.string(), 0, "not a PNG signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &reader, png_error_fn,
                                           png_warning_fn);
  png_infop info = png_create_info_struct(png);
  Tensor out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string(), reader.pos, "PNG: " + reader.error);
  }
  png_set_read_fn(png, &reader, png_read_fn);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = png_get_channels(png, info);
  buf.resize(static_cast<std::size_t>(w) * h * ch);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out = Tensor(1, ch, h, w);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(0, c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * ch + c];
  return out;
}

void write_png(const fs::path& path, const Tensor& image) {
  require_image(image, "write_png");
  const int h = image.h(), w = image.w(), ch = image.c();
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * ch);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = std::clamp(std::round(static_cast<double>(image.at(0, c, y, x))), 0.0, 255.0);
        buf[(static_cast<std::size_t>(y) * w + x) * ch + c] = static_cast<unsigned char>(v);
      }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw IoError("PNG encode failed for " + path.string() + ": " + img.message);
  }
  std::vector<unsigned char> encoded(size);
  if (!png_image_write_to_memory(&img, encoded.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw IoError("PNG encode failed for " + path.string() + ": " + img.message);
  }
  write_bytes(path, encoded.data(), size);
}

namespace {

// Reads one whitespace-delimited header token; PFM headers end with a single
// whitespace byte after the scale.
std::string pfm_token(const std::vector<unsigned char>& b, std::size_t& pos, const std::string& file) {
  while (pos < b.size() && std::isspace(b[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < b.size() && !std::isspace(b[pos])) ++pos;
  if (start == pos) throw ParseError(file, pos, "PFM: truncated header");
  return {b.begin() + static_cast<std::ptrdiff_t>(start), b.begin() + static_cast<std::ptrdiff_t>(pos)};
}

long pfm_int(const std::string& tok, std::size_t at, const std::string& file) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (*end != '\0' || v <= 0 || v > (1 << 20)) throw ParseError(file, at, "PFM: bad dimension '" + tok + "'");
  return v;
}

}  // namespace

Tensor read_pfm(const fs::path& path) {
  const auto b = read_bytes(path);
  const std::string file = path.string();
  std::size_t pos = 0;
  const std::string magic = pfm_token(b, pos, file);
  int ch;
  if (magic == "Pf") {
    ch = 1;
  } else if (magic == "PF") {
    ch = 3;
  } else {
    throw ParseError(file, 0, "PFM: bad magic '" + magic + "'");
  }
  std::size_t at = pos;
  const long w = pfm_int(pfm_token(b, pos, file), at, file);
  at = pos;
  const long h = pfm_int(pfm_token(b, pos, file), at, file);
  at = pos;
  const std::string scale_tok = pfm_token(b, pos, file);
  char* end = nullptr;
  const double scale = std::strtod(scale_tok.c_str(), &end);
  if (*end != '\0' || scale == 0 || !std::isfinite(scale)) {
    throw ParseError(file, at, "PFM: bad scale '" + scale_tok + "'");
  }
  if (pos >= b.size()) throw ParseError(file, pos, "PFM: truncated header");
  ++pos;  // single whitespace byte before the raster
  const bool little = scale < 0;
  const std::size_t count = static_cast<std::size_t>(w) * h * ch;
  if (b.size() - pos < count * 4) {
    throw ParseError(file, b.size(), "PFM: raster truncated, expected " +
                                         std::to_string(count * 4) + " bytes after offset " +
                                         std::to_string(pos));
  }
  Tensor out(1, ch, static_cast<int>(h), static_cast<int>(w));
  const bool swap = little != (std::endian::native == std::endian::little);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        std::uint32_t u;
        std::memcpy(&u, b.data() + pos, 4);
        pos += 4;
        if (swap) u = __builtin_bswap32(u);
        const float f = std::bit_cast<float>(u);
        out.at(0, c, static_cast<int>(h - 1 - y), static_cast<int>(x)) = static_cast<Real>(f);
      }
  return out;
}

void write_pfm(const fs::path& path, const Tensor& image) {
  require_image(image, "write_pfm");
  const int h = image.h(), w = image.w(), ch = image.c();
  std::ostringstream header;
  header << (ch == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n"
         << (std::endian::native == std::endian::little ? "-1.0" : "1.0") << "\n";
  std::string out = header.str();
  const std::size_t start = out.size();
  out.resize(start + static_cast<std::size_t>(w) * h * ch * 4);
  std::size_t pos = start;
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const float f = static_cast<float>(image.at(0, c, y, x));
        std::memcpy(out.data() + pos, &f, 4);
        pos += 4;
      }
  write_bytes(path, out.data(), out.size());
}

}  // namespace percdepth::io
