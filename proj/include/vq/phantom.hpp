#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vq/image.hpp"
#include "vq/transform.hpp"

namespace vq {

enum class CaseLabel { Negative, Intermediate, High };

const char* label_token(CaseLabel label);        // "neg" / "int" / "high"
CaseLabel parse_label(const std::string& token);

inline constexpr int kNumViews = 6;
// Fixed view order: anterior, posterior, left lateral, right lateral,
// left posterior oblique, right posterior oblique.
extern const std::array<const char*, kNumViews> kViewNames;

// One patient case: six views per modality plus the class label.
struct CaseStudy {
  std::array<GrayImage, kNumViews> ventilation;
  std::array<GrayImage, kNumViews> perfusion;
  CaseLabel label = CaseLabel::Negative;
};

// Ellipse in unit-square coordinates ([-1,1]^2, +y up); `value` adds to every
// covered pixel, Shepp-Logan style.
struct Ellipse {
  double value;
  double a, b;        // semi-axes
  double x0, y0;      // center
  double phi_deg;     // counterclockwise tilt
};

// Sum of ellipse values rasterized on a size x size grid (pixel centers).
PixelArray rasterize_ellipses(const std::vector<Ellipse>& ellipses, int size);

// The standard 10-ellipse head phantom table and its rasterization scaled to
// [0, 255]; the registration benchmark image.
const std::vector<Ellipse>& shepp_logan_ellipses();
GrayImage shepp_logan(int size);

// Synthetic V/Q case controls. Defect radii are in pixels; misalignment is
// applied to the ventilation images after rendering.
struct PhantomSpec {
  int image_size = 64;
  int defect_count = 0;
  double defect_radius_min = 2.5;
  double defect_radius_max = 3.5;
  double defect_depth = 0.6;     // fractional intensity drop in [0,1]
  bool throat_artifact = false;
  bool stomach_artifact = false;
  bool hotspot_artifact = false;
  TransformParams misalignment;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

void check_phantom_spec(const PhantomSpec& spec);

struct DefectDisc {
  double cx, cy;   // unit coordinates
  double radius;   // unit coordinates
};

// Realized geometry for one case: anatomy ellipses, defect placement, the
// label derived from defect area, and per-view perturbations. Exposed so
// tests can check areas and labels against the rendered images.
struct CasePlan {
  std::vector<Ellipse> anatomy;       // body + lungs + inner texture
  std::vector<Ellipse> lung_fields;   // just the two lung ellipses
  std::vector<DefectDisc> defects;
  std::array<TransformParams, kNumViews> view_jitter;  // unitless scene pose
  double hotspot_x = 0.0, hotspot_y = 0.0;
  Eigen::Index lung_area_px = 0;
  Eigen::Index defect_area_px = 0;
  CaseLabel label = CaseLabel::Negative;
};

CasePlan plan_case(const PhantomSpec& spec);
CaseStudy render_case(const CasePlan& plan, const PhantomSpec& spec);

// plan_case + render_case; bit-identical for identical specs.
CaseStudy generate_case(const PhantomSpec& spec);

// Per-class templates and counts. Case seeds derive from (seed, class,
// index); the realized label must match the requested class. When
// randomize_misalignment is set each case draws its own V-vs-Q offset within
// the given ranges instead of using the template transform.
struct DatasetSpec {
  PhantomSpec negative;
  PhantomSpec intermediate;
  PhantomSpec high;
  int n_negative = 0;
  int n_intermediate = 0;
  int n_high = 0;
  bool randomize_misalignment = false;
  double misalign_scale_range = 0.03;  // scale in 1 +- range
  double misalign_rot_range = 3.0;     // degrees
  double misalign_shift_range = 3.0;   // pixels
  std::uint64_t seed = 0;
};

std::vector<CaseStudy> generate_dataset(const DatasetSpec& spec);

// Dataset manifest: one line per case with 12 image paths (ventilation block
// then perfusion block, fixed view order) and the label token; paths are
// relative to the manifest location.
struct CaseFiles {
  std::array<std::string, kNumViews> ventilation;
  std::array<std::string, kNumViews> perfusion;
  CaseLabel label = CaseLabel::Negative;
};

void write_dataset(const std::vector<CaseStudy>& cases,
                   const std::string& out_dir,
                   const std::string& manifest_name = "manifest.txt");
std::vector<CaseFiles> read_manifest(const std::string& manifest_path);
CaseStudy load_case(const CaseFiles& files, const std::string& base_dir);
std::vector<CaseStudy> load_dataset(const std::string& manifest_path);

}  // namespace vq
