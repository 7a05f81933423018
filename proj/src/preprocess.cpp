#include "vq/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vq/error.hpp"

namespace vq {

GrayImage fshs(const GrayImage& img) {
  check_image(img);
  const double lo = img.pixels.minCoeff();
  const double hi = img.pixels.maxCoeff();
  if (hi == lo)
    throw NumericError("fshs: constant image has no intensity range");
  GrayImage out = img;
  const double k = img.max_level();
  // Multiply before dividing so integer-valued inputs map exactly; the
  // clamp and the pin of the input maximum absorb the last-ulp rounding of
  // real-valued inputs.
  out.pixels = ((img.pixels - lo) * k / (hi - lo)).min(k);
  out.pixels = (img.pixels == hi).select(k, out.pixels);
  return out;
}

GrayImage remove_hotspots(const GrayImage& img, const LungMask& mask,
                          const HotspotParams& params) {
  check_image(img);
  if (mask.width() != img.width() || mask.height() != img.height())
    throw InvalidArgument("remove_hotspots: mask dimensions do not match image");
  if (params.q <= 0.0) throw InvalidArgument("remove_hotspots: q must be > 0");
  const Eigen::Index n_mask = mask.count();
  if (n_mask == 0) throw InvalidArgument("remove_hotspots: empty mask");

  double mean = 0.0, var = 0.0;
  Eigen::Index n = 0;
  if (params.stats == HotspotParams::Stats::MaskPixels) {
    n = n_mask;
    mean = mask.bits.select(img.pixels, 0.0).sum() / static_cast<double>(n);
    var = mask.bits.select((img.pixels - mean).square(), 0.0).sum();
  } else {
    n = img.pixels.size();
    mean = img.pixels.mean();
    var = (img.pixels - mean).square().sum();
  }
  if (n < 2) throw NumericError("remove_hotspots: too few pixels for a std");
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  if (sd == 0.0)
    throw NumericError("remove_hotspots: zero intensity spread (degenerate)");

  const double clamp = mean + params.q * sd;
  GrayImage out = img;
  out.pixels = (mask.bits && img.pixels >= clamp).select(clamp, img.pixels);
  return out;
}

GrayImage smooth(const GrayImage& img, int radius) {
  check_image(img);
  if (radius < 0) throw InvalidArgument("smooth: radius must be >= 0");
  if (radius == 0) return img;

  const Eigen::Index w = img.width(), h = img.height();
  const double len = 2 * radius + 1;

  PixelArray horiz(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += img.pixels(y, std::clamp<Eigen::Index>(x + d, 0, w - 1));
      horiz(y, x) = acc / len;
    }
  }
  GrayImage out = img;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += horiz(std::clamp<Eigen::Index>(y + d, 0, h - 1), x);
      out.pixels(y, x) = acc / len;
    }
  }
  // A window mean can never leave the input range; trim rounding dust so
  // that holds bit-exactly too.
  out.pixels = out.pixels.max(img.pixels.minCoeff()).min(img.pixels.maxCoeff());
  return out;
}

namespace {

// 4-connected flood fill over `open`, marking labels; returns pixel count.
Eigen::Index flood(const BitArray& open, Plane<int>& label, int id,
                   Eigen::Index sy, Eigen::Index sx) {
  const Eigen::Index h = open.rows(), w = open.cols();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack{{sy, sx}};
  label(sy, sx) = id;
  Eigen::Index area = 0;
  while (!stack.empty()) {
    auto [y, x] = stack.back();
    stack.pop_back();
    ++area;
    const Eigen::Index ny[4] = {y - 1, y + 1, y, y};
    const Eigen::Index nx[4] = {x, x, x - 1, x + 1};
    for (int k = 0; k < 4; ++k) {
      if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
      if (!open(ny[k], nx[k]) || label(ny[k], nx[k]) != 0) continue;
      label(ny[k], nx[k]) = id;
      stack.emplace_back(ny[k], nx[k]);
    }
  }
  return area;
}

}  // namespace

LungMask segment_lung(const GrayImage& img, double level) {
  check_image(img);
  if (level <= 0.0 || level >= 1.0)
    throw InvalidArgument("segment_lung: level must be in (0, 1)");

  const double threshold = level * img.pixels.maxCoeff();
  BitArray above = img.pixels > threshold;
  if (!above.any())
    throw NumericError("segment_lung: segmentation failed, no pixel above threshold");

  const Eigen::Index h = img.height(), w = img.width();
  Plane<int> label = Plane<int>::Zero(h, w);
  std::vector<Eigen::Index> areas{0};  // areas[id], id 0 unused
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      if (above(y, x) && label(y, x) == 0)
        areas.push_back(flood(above, label, static_cast<int>(areas.size()), y, x));

  // Largest component, plus the runner-up when it exceeds a quarter of it.
  int first = 1;
  for (std::size_t id = 2; id < areas.size(); ++id)
    if (areas[id] > areas[first]) first = static_cast<int>(id);
  int second = 0;
  for (std::size_t id = 1; id < areas.size(); ++id)
    if (static_cast<int>(id) != first && (second == 0 || areas[id] > areas[second]))
      second = static_cast<int>(id);
  const bool keep_second =
      second != 0 && 4 * areas[second] > areas[first];

  LungMask mask;
  mask.bits = (label == first);
  if (keep_second) mask.bits = mask.bits || (label == second);

  // Fill interior holes: everything not reachable from the border through
  // non-mask pixels belongs to the lung.
  BitArray outside_open = !mask.bits;
  Plane<int> reach = Plane<int>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    if (outside_open(y, 0) && reach(y, 0) == 0) flood(outside_open, reach, 1, y, 0);
    if (outside_open(y, w - 1) && reach(y, w - 1) == 0)
      flood(outside_open, reach, 1, y, w - 1);
  }
  for (Eigen::Index x = 0; x < w; ++x) {
    if (outside_open(0, x) && reach(0, x) == 0) flood(outside_open, reach, 1, 0, x);
    if (outside_open(h - 1, x) && reach(h - 1, x) == 0)
      flood(outside_open, reach, 1, h - 1, x);
  }
  mask.bits = mask.bits || (outside_open && reach == 0);
  return mask;
}

GrayImage remove_artifacts(const GrayImage& img, const LungMask& mask) {
  check_image(img);
  if (mask.width() != img.width() || mask.height() != img.height())
    throw InvalidArgument("remove_artifacts: mask dimensions do not match image");
  if (mask.count() == 0) throw InvalidArgument("remove_artifacts: empty mask");
  GrayImage out = img;
  out.pixels = mask.bits.select(img.pixels, 0.0);
  return out;
}

PixelArray resize_bilinear(const PixelArray& src, Eigen::Index new_w,
                           Eigen::Index new_h) {
  if (new_w < 1 || new_h < 1)
    throw InvalidArgument("resize: target dimensions must be at least 1x1");
  const Eigen::Index w = src.cols(), h = src.rows();
  PixelArray out(new_h, new_w);
  const double sx = static_cast<double>(w) / static_cast<double>(new_w);
  const double sy = static_cast<double>(h) / static_cast<double>(new_h);
  for (Eigen::Index y = 0; y < new_h; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(fy));
    const double wy = fy - static_cast<double>(y0);
    const Eigen::Index ya = std::clamp<Eigen::Index>(y0, 0, h - 1);
    const Eigen::Index yb = std::clamp<Eigen::Index>(y0 + 1, 0, h - 1);
    for (Eigen::Index x = 0; x < new_w; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(fx));
      const double wx = fx - static_cast<double>(x0);
      const Eigen::Index xa = std::clamp<Eigen::Index>(x0, 0, w - 1);
      const Eigen::Index xb = std::clamp<Eigen::Index>(x0 + 1, 0, w - 1);
      out(y, x) = (1.0 - wy) * ((1.0 - wx) * src(ya, xa) + wx * src(ya, xb)) +
                  wy * ((1.0 - wx) * src(yb, xa) + wx * src(yb, xb));
    }
  }
  return out;
}

GrayImage resize(const GrayImage& img, Eigen::Index new_w, Eigen::Index new_h) {
  check_image(img);
  GrayImage out;
  out.levels = img.levels;
  out.pixels = resize_bilinear(img.pixels, new_w, new_h);
  return out;
}

}  // namespace vq
