#include "vq/phantom.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "vq/error.hpp"
#include "vq/rng.hpp"

namespace vq {

const std::array<const char*, kNumViews> kViewNames = {"ant", "post", "llat",
                                                       "rlat", "lpo", "rpo"};

const char* label_token(CaseLabel label) {
  switch (label) {
    case CaseLabel::Negative: return "neg";
    case CaseLabel::Intermediate: return "int";
    case CaseLabel::High: return "high";
  }
  return "neg";
}

CaseLabel parse_label(const std::string& token) {
  if (token == "neg") return CaseLabel::Negative;
  if (token == "int") return CaseLabel::Intermediate;
  if (token == "high") return CaseLabel::High;
  throw DataError("unknown label token: " + token);
}

PixelArray rasterize_ellipses(const std::vector<Ellipse>& ellipses, int size) {
  if (size < 1) throw InvalidArgument("rasterize: size must be >= 1");
  PixelArray out = PixelArray::Zero(size, size);
  struct Pre {
    double c, s, x0, y0, inv_a2, inv_b2, value;
  };
  std::vector<Pre> pre;
  pre.reserve(ellipses.size());
  for (const Ellipse& e : ellipses) {
    const double rad = e.phi_deg * std::numbers::pi / 180.0;
    pre.push_back({std::cos(rad), std::sin(rad), e.x0, e.y0,
                   1.0 / (e.a * e.a), 1.0 / (e.b * e.b), e.value});
  }
  for (int py = 0; py < size; ++py) {
    const double y = 1.0 - 2.0 * (py + 0.5) / size;  // +y up
    for (int px = 0; px < size; ++px) {
      const double x = -1.0 + 2.0 * (px + 0.5) / size;
      double v = 0.0;
      for (const Pre& e : pre) {
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = e.c * dx + e.s * dy;
        const double w = -e.s * dx + e.c * dy;
        if (u * u * e.inv_a2 + w * w * e.inv_b2 <= 1.0) v += e.value;
      }
      out(py, px) = v;
    }
  }
  return out;
}

const std::vector<Ellipse>& shepp_logan_ellipses() {
  static const std::vector<Ellipse> table = {
      {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
      {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
      {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
      {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
  };
  return table;
}

GrayImage shepp_logan(int size) {
  if (size < 16) throw InvalidArgument("shepp_logan: size must be >= 16");
  PixelArray sum = rasterize_ellipses(shepp_logan_ellipses(), size);
  const double hi = sum.maxCoeff();
  GrayImage img = make_image(size, size);
  img.pixels = sum * (255.0 / hi);
  return img;
}

void check_phantom_spec(const PhantomSpec& spec) {
  if (spec.image_size < 16)
    throw InvalidArgument("phantom: image_size must be >= 16");
  if (spec.defect_count < 0)
    throw InvalidArgument("phantom: defect_count must be >= 0");
  if (spec.defect_depth < 0.0 || spec.defect_depth > 1.0)
    throw InvalidArgument("phantom: defect_depth must be in [0, 1]");
  if (spec.noise_sigma < 0.0)
    throw InvalidArgument("phantom: noise_sigma must be >= 0");
  if (!(spec.defect_radius_min > 0.0) ||
      spec.defect_radius_max < spec.defect_radius_min)
    throw InvalidArgument("phantom: bad defect radius range");
  check_transform(spec.misalignment);
}

namespace {

// Base anatomy in unit coordinates. Lungs are value 0.65 on a 0.10 body halo
// with a brighter inner texture ellipse so segmentation and alignment see
// internal gradients.
constexpr double kLungA = 0.30, kLungB = 0.58, kLungY = -0.05;
constexpr double kLungX = 0.42, kLungTiltDeg = 8.0;

std::vector<Ellipse> base_lung_fields() {
  return {
      {0.65, kLungA, kLungB, -kLungX, kLungY, kLungTiltDeg},
      {0.65, kLungA, kLungB, kLungX, kLungY, -kLungTiltDeg},
  };
}

std::vector<Ellipse> base_anatomy() {
  std::vector<Ellipse> anatomy = {
      {0.10, 0.88, 0.78, 0.0, -0.02, 0.0},
  };
  for (const Ellipse& lung : base_lung_fields()) anatomy.push_back(lung);
  anatomy.push_back({0.10, 0.16, 0.34, -kLungX, kLungY, kLungTiltDeg});
  anatomy.push_back({0.10, 0.16, 0.34, kLungX, kLungY, -kLungTiltDeg});
  return anatomy;
}

bool inside_ellipse(const Ellipse& e, double x, double y) {
  const double rad = e.phi_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double dx = x - e.x0, dy = y - e.y0;
  const double u = c * dx + s * dy;
  const double w = -s * dx + c * dy;
  return u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0;
}

bool inside_any_defect(const std::vector<DefectDisc>& defects, double x,
                       double y) {
  for (const DefectDisc& d : defects) {
    const double dx = x - d.cx, dy = y - d.cy;
    if (dx * dx + dy * dy <= d.radius * d.radius) return true;
  }
  return false;
}

Ellipse jittered(const Ellipse& e, const TransformParams& pose) {
  Ellipse out = e;
  out.a *= pose.scale;
  out.b *= pose.scale;
  out.x0 = e.x0 * pose.scale + pose.tx;
  out.y0 = e.y0 * pose.scale + pose.ty;
  return out;
}

DefectDisc jittered(const DefectDisc& d, const TransformParams& pose) {
  return DefectDisc{d.cx * pose.scale + pose.tx, d.cy * pose.scale + pose.ty,
                    d.radius * pose.scale};
}

constexpr double kThroatHalfWidth = 0.05, kThroatYLo = 0.60, kThroatYHi = 0.95;
constexpr double kStomachX = -0.30, kStomachY = -0.80, kStomachR = 0.12;
constexpr double kHotspotRadiusPx = 1.8;

}  // namespace

CasePlan plan_case(const PhantomSpec& spec) {
  check_phantom_spec(spec);
  Rng rng(derive_seed(spec.seed, "phantom-plan"));

  CasePlan plan;
  plan.anatomy = base_anatomy();
  plan.lung_fields = base_lung_fields();

  const double px_to_unit = 2.0 / spec.image_size;
  for (int i = 0; i < spec.defect_count; ++i) {
    const double r_px =
        rng.uniform(spec.defect_radius_min, spec.defect_radius_max);
    const double r = r_px * px_to_unit;
    const Ellipse& lung = plan.lung_fields[rng.below(2)];
    const double ea = lung.a - r, eb = lung.b - r;
    if (ea <= 0.0 || eb <= 0.0)
      throw NumericError("phantom: defect radius too large for the lung field");
    // Uniform point in the shrunk ellipse keeps the whole disc inside.
    double ux, uy;
    do {
      ux = rng.uniform(-1.0, 1.0);
      uy = rng.uniform(-1.0, 1.0);
    } while (ux * ux + uy * uy > 1.0);
    const double rad = lung.phi_deg * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    plan.defects.push_back(DefectDisc{
        lung.x0 + c * (ux * ea) - s * (uy * eb),
        lung.y0 + s * (ux * ea) + c * (uy * eb), r});
  }

  if (spec.hotspot_artifact) {
    const Ellipse& lung = plan.lung_fields[rng.below(2)];
    double ux, uy;
    do {
      ux = rng.uniform(-1.0, 1.0);
      uy = rng.uniform(-1.0, 1.0);
    } while (ux * ux + uy * uy > 1.0);
    plan.hotspot_x = lung.x0 + 0.6 * ux * lung.a;
    plan.hotspot_y = lung.y0 + 0.6 * uy * lung.b;
  }

  // Anterior view is the canonical pose; the others get small perturbations.
  plan.view_jitter[0] = TransformParams{};
  for (int v = 1; v < kNumViews; ++v)
    plan.view_jitter[v] = TransformParams{rng.uniform(0.97, 1.03), 0.0,
                                          rng.uniform(-0.03, 0.03),
                                          rng.uniform(-0.03, 0.03)};

  // Label from defect coverage of the lung fields in the canonical view.
  const int size = spec.image_size;
  Eigen::Index lung_px = 0, defect_px = 0;
  for (int py = 0; py < size; ++py) {
    const double y = 1.0 - 2.0 * (py + 0.5) / size;
    for (int px = 0; px < size; ++px) {
      const double x = -1.0 + 2.0 * (px + 0.5) / size;
      const bool in_lung = inside_ellipse(plan.lung_fields[0], x, y) ||
                           inside_ellipse(plan.lung_fields[1], x, y);
      if (!in_lung) continue;
      ++lung_px;
      if (inside_any_defect(plan.defects, x, y)) ++defect_px;
    }
  }
  plan.lung_area_px = lung_px;
  plan.defect_area_px = defect_px;
  const double ratio =
      lung_px > 0 ? static_cast<double>(defect_px) / lung_px : 0.0;
  plan.label = defect_px == 0 ? CaseLabel::Negative
               : ratio <= 0.05 ? CaseLabel::Intermediate
                               : CaseLabel::High;
  return plan;
}

CaseStudy render_case(const CasePlan& plan, const PhantomSpec& spec) {
  check_phantom_spec(spec);
  Rng rng(derive_seed(spec.seed, "phantom-render"));
  const int size = spec.image_size;

  CaseStudy cs;
  cs.label = plan.label;
  for (int v = 0; v < kNumViews; ++v) {
    const TransformParams& pose = plan.view_jitter[v];
    std::vector<Ellipse> anatomy;
    anatomy.reserve(plan.anatomy.size());
    for (const Ellipse& e : plan.anatomy) anatomy.push_back(jittered(e, pose));
    std::vector<DefectDisc> defects;
    defects.reserve(plan.defects.size());
    for (const DefectDisc& d : plan.defects)
      defects.push_back(jittered(d, pose));

    PixelArray base = rasterize_ellipses(anatomy, size);
    PixelArray vent = base;
    PixelArray perf = base;

    const double hx = plan.hotspot_x * pose.scale + pose.tx;
    const double hy = plan.hotspot_y * pose.scale + pose.ty;
    const double hr = kHotspotRadiusPx * (2.0 / size) * pose.scale;
    for (int py = 0; py < size; ++py) {
      const double y = 1.0 - 2.0 * (py + 0.5) / size;
      for (int px = 0; px < size; ++px) {
        const double x = -1.0 + 2.0 * (px + 0.5) / size;
        if (inside_any_defect(defects, x, y))
          perf(py, px) *= 1.0 - spec.defect_depth;
        if (spec.throat_artifact && std::abs(x - pose.tx) < kThroatHalfWidth &&
            y > kThroatYLo * pose.scale + pose.ty &&
            y < kThroatYHi * pose.scale + pose.ty)
          vent(py, px) = std::max(vent(py, px), 0.90);
        if (spec.stomach_artifact) {
          const double dx = x - (kStomachX * pose.scale + pose.tx);
          const double dy = y - (kStomachY * pose.scale + pose.ty);
          const double r = kStomachR * pose.scale;
          if (dx * dx + dy * dy <= r * r)
            vent(py, px) = std::max(vent(py, px), 0.85);
        }
        if (spec.hotspot_artifact) {
          const double dx = x - hx, dy = y - hy;
          if (dx * dx + dy * dy <= hr * hr) vent(py, px) = 1.0;
        }
      }
    }

    GrayImage vimg = make_image(size, size);
    vimg.pixels = vent * 255.0;
    GrayImage qimg = make_image(size, size);
    qimg.pixels = perf * 255.0;
    vimg = apply_transform(vimg, spec.misalignment);

    if (spec.noise_sigma > 0.0) {
      for (Eigen::Index py = 0; py < size; ++py)
        for (Eigen::Index px = 0; px < size; ++px)
          vimg.pixels(py, px) += rng.normal(0.0, spec.noise_sigma);
      for (Eigen::Index py = 0; py < size; ++py)
        for (Eigen::Index px = 0; px < size; ++px)
          qimg.pixels(py, px) += rng.normal(0.0, spec.noise_sigma);
    }
    vimg.pixels = vimg.pixels.cwiseMax(0.0).cwiseMin(255.0);
    qimg.pixels = qimg.pixels.cwiseMax(0.0).cwiseMin(255.0);

    cs.ventilation[v] = std::move(vimg);
    cs.perfusion[v] = std::move(qimg);
  }
  return cs;
}

CaseStudy generate_case(const PhantomSpec& spec) {
  return render_case(plan_case(spec), spec);
}

std::vector<CaseStudy> generate_dataset(const DatasetSpec& spec) {
  if (spec.n_negative < 0 || spec.n_intermediate < 0 || spec.n_high < 0)
    throw InvalidArgument("dataset: counts must be >= 0");

  struct ClassJob {
    const PhantomSpec* tmpl;
    int count;
    CaseLabel want;
  };
  const ClassJob jobs[3] = {
      {&spec.negative, spec.n_negative, CaseLabel::Negative},
      {&spec.intermediate, spec.n_intermediate, CaseLabel::Intermediate},
      {&spec.high, spec.n_high, CaseLabel::High},
  };

  std::vector<CaseStudy> cases;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < jobs[cls].count; ++i) {
      bool done = false;
      for (std::uint64_t attempt = 0; attempt < 32 && !done; ++attempt) {
        PhantomSpec ps = *jobs[cls].tmpl;
        ps.seed = derive_seed(spec.seed, "phantom-case",
                              (static_cast<std::uint64_t>(cls) << 40) |
                                  (static_cast<std::uint64_t>(i) << 8) |
                                  attempt);
        if (spec.randomize_misalignment) {
          Rng mrng(derive_seed(ps.seed, "misalign"));
          ps.misalignment.scale =
              mrng.uniform(1.0 - spec.misalign_scale_range,
                           1.0 + spec.misalign_scale_range);
          ps.misalignment.rotation_deg =
              mrng.uniform(-spec.misalign_rot_range, spec.misalign_rot_range);
          ps.misalignment.tx = mrng.uniform(-spec.misalign_shift_range,
                                            spec.misalign_shift_range);
          ps.misalignment.ty = mrng.uniform(-spec.misalign_shift_range,
                                            spec.misalign_shift_range);
        }
        CaseStudy cs = generate_case(ps);
        if (cs.label == jobs[cls].want) {
          cases.push_back(std::move(cs));
          done = true;
        }
      }
      if (!done)
        throw NumericError(
            "dataset: class template keeps producing the wrong label");
    }
  }

  // Deterministic Fisher-Yates shuffle of the assembled dataset.
  Rng srng(derive_seed(spec.seed, "dataset-shuffle"));
  for (std::size_t i = cases.size(); i > 1; --i)
    std::swap(cases[i - 1], cases[srng.below(i)]);
  return cases;
}

namespace {

std::string case_image_name(std::size_t case_idx, bool ventilation, int view) {
  std::ostringstream name;
  name << "case" << std::setw(4) << std::setfill('0') << case_idx << '_'
       << (ventilation ? 'v' : 'q') << '_' << kViewNames[view] << ".pgm";
  return name.str();
}

}  // namespace

void write_dataset(const std::vector<CaseStudy>& cases,
                   const std::string& out_dir,
                   const std::string& manifest_name) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream manifest(fs::path(out_dir) / manifest_name);
  if (!manifest) throw DataError("cannot write manifest under " + out_dir);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    for (int v = 0; v < kNumViews; ++v) {
      const std::string name = case_image_name(i, true, v);
      write_pgm(cases[i].ventilation[v], (fs::path(out_dir) / name).string());
      manifest << name << ' ';
    }
    for (int v = 0; v < kNumViews; ++v) {
      const std::string name = case_image_name(i, false, v);
      write_pgm(cases[i].perfusion[v], (fs::path(out_dir) / name).string());
      manifest << name << ' ';
    }
    manifest << label_token(cases[i].label) << '\n';
  }
}

std::vector<CaseFiles> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path);
  std::vector<CaseFiles> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    CaseFiles cf;
    std::string token;
    for (int v = 0; v < kNumViews; ++v)
      if (!(ss >> cf.ventilation[v]))
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": expected 12 paths and a label");
    for (int v = 0; v < kNumViews; ++v)
      if (!(ss >> cf.perfusion[v]))
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": expected 12 paths and a label");
    if (!(ss >> token))
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": missing label token");
    cf.label = parse_label(token);
    out.push_back(std::move(cf));
  }
  return out;
}

CaseStudy load_case(const CaseFiles& files, const std::string& base_dir) {
  namespace fs = std::filesystem;
  CaseStudy cs;
  cs.label = files.label;
  for (int v = 0; v < kNumViews; ++v) {
    cs.ventilation[v] = read_pgm((fs::path(base_dir) / files.ventilation[v]).string());
    cs.perfusion[v] = read_pgm((fs::path(base_dir) / files.perfusion[v]).string());
  }
  return cs;
}

std::vector<CaseStudy> load_dataset(const std::string& manifest_path) {
  const std::string dir =
      std::filesystem::path(manifest_path).parent_path().string();
  std::vector<CaseStudy> out;
  for (const CaseFiles& cf : read_manifest(manifest_path))
    out.push_back(load_case(cf, dir.empty() ? "." : dir));
  return out;
}

}  // namespace vq
