#pragma once

#include "vq/image.hpp"

namespace vq {

// Rigid-plus-scale transform: scale and rotation about the image center,
// then translation in pixels. Rotation is in degrees, normalized to
// (-180, 180].
struct TransformParams {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

TransformParams normalized(TransformParams t);
void check_transform(const TransformParams& t);

// Resamples the image under the transform: each output pixel is sampled from
// the input at the inverse-mapped coordinate with bilinear interpolation;
// out-of-bounds samples read as 0. The identity transform returns the input
// exactly.
GrayImage apply_transform(const GrayImage& img, const TransformParams& t);
PixelArray apply_transform(const PixelArray& src, const TransformParams& t);

// Two-valued image: levels-1 inside the mask, 0 outside. Feeding binary
// images to the aligner suppresses the influence of intra-lung defects.
GrayImage binarize(const GrayImage& img, const LungMask& mask);

// Jaccard overlap |A & B| / |A | B| of the binarized transformed reference
// against the binarized target; membership is pixel > (levels-1)/2. Returns 1
// iff the support sets are identical; throws when both supports are empty.
double overlap_fitness(const GrayImage& reference, const GrayImage& target,
                       const TransformParams& t);

}  // namespace vq
