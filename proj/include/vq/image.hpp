#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace vq {

// Row-major dense pixel grid: element (y, x), origin at the top-left corner.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PixelArray = Plane<double>;
using BitArray = Plane<bool>;

// Grayscale image with intensities in [0, levels-1]. Pixel values stay
// real-valued through the processing chain; quantization to 8 bits happens
// only when the image is written to disk.
struct GrayImage {
  PixelArray pixels;
  int levels = 256;

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
  double max_level() const { return static_cast<double>(levels - 1); }
};

GrayImage make_image(Eigen::Index width, Eigen::Index height,
                     double fill = 0.0, int levels = 256);

// Throws InvalidArgument when a type invariant is violated.
void check_image(const GrayImage& img);

// Binary lung membership mask; dimensions match the image it was derived from.
struct LungMask {
  BitArray bits;

  Eigen::Index width() const { return bits.cols(); }
  Eigen::Index height() const { return bits.rows(); }
  Eigen::Index count() const { return bits.count(); }
};

// Binary portable graymap I/O (P5, maxval 255). The canonical wire format is
// "P5\n<width> <height>\n255\n" followed by width*height raw bytes, row-major
// from the top-left. read_pgm additionally tolerates '#' comments and general
// whitespace in the header.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

// Round-half-up quantization into [0, 255].
std::uint8_t quantize8(double v);

}  // namespace vq
