#pragma once

#include "vq/image.hpp"

namespace vq {

// Hotspot criterion: a masked pixel whose z-score (V - mean)/std reaches q is
// clamped down to mean + q*std. The statistics default to the masked region;
// background zeros would otherwise bias the mean.
struct HotspotParams {
  double q = 3.0;
  enum class Stats { MaskPixels, WholeImage } stats = Stats::MaskPixels;
};

// Full-scale histogram stretch: v -> (v - min) * (levels-1) / (max - min).
// Throws NumericError on a constant image.
GrayImage fshs(const GrayImage& img);

GrayImage remove_hotspots(const GrayImage& img, const LungMask& mask,
                          const HotspotParams& params = {});

// Separable box-mean filter of window (2*radius+1)^2 with clamped borders.
// radius 0 is the identity.
GrayImage smooth(const GrayImage& img, int radius);

// Thresholds at level * max, keeps the largest 4-connected component (and the
// second largest when it exceeds 25% of the largest), and fills interior
// holes. Throws NumericError when nothing is above the threshold.
LungMask segment_lung(const GrayImage& img, double level);

// Zeroes every pixel outside the mask; throat and stomach blobs fall away
// because component selection in segment_lung already excluded them.
GrayImage remove_artifacts(const GrayImage& img, const LungMask& mask);

// Bilinear resampling with pixel-center alignment and clamped borders.
GrayImage resize(const GrayImage& img, Eigen::Index new_w, Eigen::Index new_h);
PixelArray resize_bilinear(const PixelArray& src, Eigen::Index new_w,
                           Eigen::Index new_h);

}  // namespace vq
