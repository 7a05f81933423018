#include "vq/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "vq/error.hpp"

namespace vq {

GrayImage make_image(Eigen::Index width, Eigen::Index height, double fill,
                     int levels) {
  if (width < 1 || height < 1)
    throw InvalidArgument("image dimensions must be at least 1x1");
  GrayImage img;
  img.pixels = PixelArray::Constant(height, width, fill);
  img.levels = levels;
  return img;
}

void check_image(const GrayImage& img) {
  if (img.width() < 1 || img.height() < 1)
    throw InvalidArgument("image dimensions must be at least 1x1");
  if (img.levels < 2) throw InvalidArgument("image needs at least 2 levels");
  if (!img.pixels.isFinite().all())
    throw InvalidArgument("pixel values must be finite");
  if ((img.pixels < 0.0).any() || (img.pixels > img.max_level()).any())
    throw InvalidArgument("pixel values outside [0, levels-1]");
}

std::uint8_t quantize8(double v) {
  double r = std::floor(v + 0.5);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<std::uint8_t>(r);
}

namespace {

// Skips whitespace and '#' comment lines, then reads one unsigned decimal.
long read_header_int(std::istream& in, const char* field) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw DataError(std::string("pgm parse error: invalid ") + field);
  long value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 30)
      throw DataError(std::string("pgm parse error: ") + field + " too large");
    c = in.get();
  }
  if (c != EOF) in.unget();
  return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file: " + path);

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5')
    throw DataError("pgm parse error: bad magic (expected P5): " + path);

  const long width = read_header_int(in, "width");
  const long height = read_header_int(in, "height");
  const long maxval = read_header_int(in, "maxval");
  if (width < 1 || height < 1)
    throw DataError("pgm parse error: non-positive dimensions: " + path);
  if (maxval != 255)
    throw DataError("pgm parse error: unsupported maxval " +
                    std::to_string(maxval) + " (expected 255): " + path);
  in.get();  // single whitespace byte separating header from raster

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw DataError("pgm parse error: truncated pixel data (expected " +
                    std::to_string(raw.size()) + " bytes, found " +
                    std::to_string(in.gcount()) + "): " + path);

  GrayImage img = make_image(width, height);
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x)
      img.pixels(y, x) = static_cast<double>(raw[y * width + x]);
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  check_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file: " + path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.width()) *
                                img.height());
  for (Eigen::Index y = 0; y < img.height(); ++y)
    for (Eigen::Index x = 0; x < img.width(); ++x)
      raw[y * img.width() + x] = quantize8(img.pixels(y, x));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace vq
