#pragma once

// PNG (8-bit) and PFM (32-bit float, little-endian) image I/O.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "omsi/image.hpp"

namespace omsi {

static_assert(std::endian::native == std::endian::little, "omsi file formats assume a little-endian host");

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

inline void png_flush_noop(png_structp) {}

struct PngReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_read_from_cursor(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->size) png_error(png, "truncated PNG");
  std::memcpy(out, cur->data + cur->pos, len);
  cur->pos += len;
}

[[noreturn]] inline void png_throw(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
inline void png_warn_silent(png_structp, png_const_charp) {}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Encodes 1- or 3-channel images as 8-bit PNG. Encoder settings are fixed,
/// so identical images give identical bytes.
template <int C>
std::vector<std::uint8_t> encode_png(const Image<C>& img) {
  static_assert(C == 1 || C == 3);
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw,
                                            detail::png_warn_silent);
  if (!png) throw IoError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * C);
  try {
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_IHDR(png, info, img.width, img.height, 8, C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_write_info(png, info);
    for (int v = 0; v < img.height; ++v) {
      const float* src = img.at(0, v);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = quantize_unit(src[i]);
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

/// Decodes an 8-bit PNG into a 3-channel image (gray is expanded).
inline ImageRGB decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("png: bad signature");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw,
                                           detail::png_warn_silent);
  if (!png) throw IoError("png: cannot create reader");
  png_infop info = png_create_info_struct(png);
  detail::PngReadCursor cursor{bytes.data(), bytes.size(), 0};
  ImageRGB img;
  try {
    png_set_read_fn(png, &cursor, detail::png_read_from_cursor);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_gray_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) throw IoError("png: unexpected layout");
    img = ImageRGB(w, h);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int v = 0; v < h; ++v) {
      png_read_row(png, row.data(), nullptr);
      float* dst = img.at(0, v);
      for (std::size_t i = 0; i < row.size(); ++i) dst[i] = row[i] / 255.0f;
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

template <int C>
void write_png(const std::filesystem::path& path, const Image<C>& img) {
  detail::write_file_bytes(path, encode_png(img));
}

inline ImageRGB read_png_rgb(const std::filesystem::path& path) {
  return decode_png_rgb(detail::read_file_bytes(path));
}

// PFM: "Pf" header, negative scale marks little-endian, rows stored bottom-up.

inline std::vector<std::uint8_t> encode_pfm(const ImageGray& img) {
  std::ostringstream hdr;
  hdr << "Pf\n" << img.width << ' ' << img.height << "\n-1.0\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * sizeof(float);
  out.reserve(out.size() + row_bytes * img.height);
  for (int v = img.height - 1; v >= 0; --v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(img.at(0, v));
    out.insert(out.end(), p, p + row_bytes);
  }
  return out;
}

inline ImageGray decode_pfm(const std::vector<std::uint8_t>& bytes) {
  std::string text(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 128)));
  std::istringstream in(text);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || magic != "Pf") throw IoError("pfm: expected single-channel 'Pf' header");
  if (w <= 0 || h <= 0) throw IoError("pfm: bad dimensions");
  if (scale >= 0.0) throw IoError("pfm: big-endian files are not supported");
  const auto header_end = static_cast<std::size_t>(in.tellg()) + 1;  // single whitespace after scale
  const std::size_t row_bytes = static_cast<std::size_t>(w) * sizeof(float);
  if (bytes.size() < header_end + row_bytes * h) throw IoError("pfm: truncated data");
  ImageGray img(w, h);
  for (int v = h - 1, r = 0; v >= 0; --v, ++r) {
    std::memcpy(img.at(0, v), bytes.data() + header_end + r * row_bytes, row_bytes);
  }
  return img;
}

inline void write_pfm(const std::filesystem::path& path, const ImageGray& img) {
  detail::write_file_bytes(path, encode_pfm(img));
}

inline ImageGray read_pfm(const std::filesystem::path& path) { return decode_pfm(detail::read_file_bytes(path)); }

}  // namespace omsi
