#include "garment/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "garment/errors.hpp"

namespace garment {

float Image::sample_bilinear(double px, double py, int c) const {
  const double fx = px - 0.5, fy = py - 0.5;
  int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
  const double tx = fx - x0, ty = fy - y0;
  const int x1 = std::clamp(x0 + 1, 0, width - 1);
  const int y1 = std::clamp(y0 + 1, 0, height - 1);
  x0 = std::clamp(x0, 0, width - 1);
  y0 = std::clamp(y0, 0, height - 1);
  const double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
  const double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
  return float((v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty);
}

namespace {

struct MemReader {
  const uint8_t* data;
  size_t size;
  size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + count > r->size) png_error(png, "read past end of PNG buffer");
  std::memcpy(out, r->data + r->pos, count);
  r->pos += count;
}

void png_mem_write(png_structp png, png_bytep data, png_size_t count) {
  auto* v = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  v->insert(v->end(), data, data + count);
}

void png_mem_flush(png_structp) {}

Image decode_impl(png_structp png, png_infop info) {
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  Image img(int(w), int(h), channels);
  std::vector<uint8_t> row(size_t(w) * channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (size_t i = 0; i < row.size(); ++i)
      img.data[size_t(y) * w * channels + i] = float(row[i]) / 255.f;
  }
  png_read_end(png, nullptr);
  return img;
}

}  // namespace

Image decode_png(const std::vector<uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  MemReader reader{bytes.data(), bytes.size(), 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG from memory");
  }
  png_set_read_fn(png, &reader, png_mem_read);
  Image img = decode_impl(png, info);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Image load_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw IoError("cannot open PNG file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG file: " + path);
  }
  png_init_io(png, fp.get());
  Image img = decode_impl(png, info);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

void encode_impl(png_structp png, png_infop info, const Image& image) {
  int color_type;
  switch (image.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: png_error(png, "unsupported channel count");
      return;
  }
  png_set_IHDR(png, info, image.width, image.height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(image.width) * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (size_t i = 0; i < row.size(); ++i) {
      const float v = image.data[size_t(y) * image.width * image.channels + i];
      row[i] = uint8_t(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

std::vector<uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw IoError("cannot encode an empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG");
  }
  png_set_write_fn(png, &out, png_mem_write, png_mem_flush);
  encode_impl(png, info, image);
  png_destroy_write_struct(&png, &info);
  return out;
}

void save_png(const Image& image, const std::string& path) {
  const std::vector<uint8_t> bytes = encode_png(image);
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write PNG file: " + path);
  if (std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size())
    throw IoError("failed writing PNG file: " + path);
}

}  // namespace garment
