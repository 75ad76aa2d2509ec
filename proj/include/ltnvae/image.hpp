#pragma once

#include <string>
#include <vector>

#include "ltnvae/common.hpp"

namespace ltnvae {

// Raster image with pixel values in [0,1], stored [H,W,C] row-major.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0.0f) {
    if (h < 1 || w < 1 || c < 1) throw ShapeError("ImageTensor: extents must be >= 1");
  }

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return pixels.size(); }

  void validate_range() const {
    for (float v : pixels)
      if (!(v >= 0.0f && v <= 1.0f))
        throw DomainError("ImageTensor: pixel value outside [0,1]");
  }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// 8-bit binary PGM (1 channel) / PPM (3 channels) I/O. Values are scaled
// to [0,1] on read and quantized with rounding on write.
ImageTensor read_raster(const std::string& path);
void write_raster(const std::string& path, const ImageTensor& img);

}  // namespace ltnvae
