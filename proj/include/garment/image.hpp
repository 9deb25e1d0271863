#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace garment {

// Row-major interleaved float image, values in [0,1]. Row 0 is the top.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  float& at(int x, int y, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(size_t(y) * width + x) * channels + c]; }
  bool empty() const { return data.empty(); }
  size_t pixel_count() const { return size_t(width) * height; }

  // Bilinear sample at pixel coordinates (px, py), pixel centers at x+0.5.
  // Clamps to the border.
  float sample_bilinear(double px, double py, int c) const;
};

// 8-bit PNG I/O. Gray, gray+alpha, RGB and RGBA files load with the matching
// channel count; writes accept 1, 3, or 4 channels.
Image load_png(const std::string& path);
void save_png(const Image& image, const std::string& path);

Image decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const Image& image);

}  // namespace garment
