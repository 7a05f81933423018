#include "vq/transform.hpp"

#include <cmath>
#include <numbers>

#include "vq/error.hpp"

namespace vq {

TransformParams normalized(TransformParams t) {
  t.rotation_deg = std::fmod(t.rotation_deg, 360.0);
  if (t.rotation_deg > 180.0) t.rotation_deg -= 360.0;
  if (t.rotation_deg <= -180.0) t.rotation_deg += 360.0;
  return t;
}

void check_transform(const TransformParams& t) {
  if (!(t.scale > 0.0)) throw InvalidArgument("transform: scale must be > 0");
  if (!std::isfinite(t.rotation_deg) || !std::isfinite(t.tx) ||
      !std::isfinite(t.ty))
    throw InvalidArgument("transform: parameters must be finite");
}

PixelArray apply_transform(const PixelArray& src, const TransformParams& t) {
  check_transform(t);
  const Eigen::Index w = src.cols(), h = src.rows();
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double cy = 0.5 * static_cast<double>(h - 1);
  const double rad = t.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double inv_scale = 1.0 / t.scale;

  PixelArray out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      // Inverse map: undo translation, then rotation and scale about center.
      const double dx = static_cast<double>(x) - t.tx - cx;
      const double dy = static_cast<double>(y) - t.ty - cy;
      const double px = inv_scale * (c * dx + s * dy) + cx;
      const double py = inv_scale * (-s * dx + c * dy) + cy;

      const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(px));
      const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(py));
      const double fx = px - static_cast<double>(x0);
      const double fy = py - static_cast<double>(y0);
      auto sample = [&](Eigen::Index yy, Eigen::Index xx) {
        return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? src(yy, xx) : 0.0;
      };
      out(y, x) =
          (1.0 - fy) * ((1.0 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
          fy * ((1.0 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
    }
  }
  return out;
}

GrayImage apply_transform(const GrayImage& img, const TransformParams& t) {
  check_image(img);
  GrayImage out;
  out.levels = img.levels;
  // Bilinear samples are convex combinations of in-range values; the clamp
  // only trims floating-point dust at the range ends.
  out.pixels = apply_transform(img.pixels, t).max(0.0).min(img.max_level());
  return out;
}

GrayImage binarize(const GrayImage& img, const LungMask& mask) {
  check_image(img);
  if (mask.width() != img.width() || mask.height() != img.height())
    throw InvalidArgument("binarize: mask dimensions do not match image");
  GrayImage out = img;
  out.pixels = mask.bits.select(img.max_level(), PixelArray::Zero(img.height(), img.width()));
  return out;
}

double overlap_fitness(const GrayImage& reference, const GrayImage& target,
                       const TransformParams& t) {
  check_image(reference);
  check_image(target);
  if (reference.width() != target.width() ||
      reference.height() != target.height())
    throw InvalidArgument("overlap_fitness: image dimensions differ");

  const double half = 0.5 * reference.max_level();
  const PixelArray moved = apply_transform(reference.pixels, t);
  const BitArray a = moved > half;
  const BitArray b = target.pixels > half;
  const Eigen::Index inter = (a && b).count();
  const Eigen::Index uni = (a || b).count();
  if (uni == 0)
    throw NumericError("overlap_fitness: both supports are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace vq
