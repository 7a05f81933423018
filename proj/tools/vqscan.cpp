// vqscan: ventilation/perfusion scan analysis pipeline.
//
// Subcommands cover the whole flow: synthetic dataset generation,
// preprocessing, ventilation-onto-perfusion alignment, feature extraction,
// committee training, prediction, evaluation, the hyperparameter sweep, and
// the alignment benchmark.  Every stage reads `key = value` config files
// via --config; command-line flags win over file values.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "vq/error.hpp"
#include "vq/eval.hpp"
#include "vq/features.hpp"
#include "vq/ga.hpp"
#include "vq/hmc.hpp"
#include "vq/image.hpp"
#include "vq/phantom.hpp"
#include "vq/pipeline.hpp"
#include "vq/preprocess.hpp"
#include "vq/rng.hpp"
#include "vq/transform.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string mask_name(std::size_t case_index, char modality, int view) {
  return vq::case_id_for_index(case_index) + "_" + modality + std::string("mask_") +
         vq::kViewNames[static_cast<std::size_t>(view)] + ".pgm";
}

void add_config_opt(CLI::App* sub) {
  sub->add_option("--config",
                  "configuration file: `key = value` lines, `#` comments; "
                  "explicitly passed flags win over file values")
      ->option_text("FILE");
}

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Reads a `key = value` config file: `#` starts a comment, blank lines are
// skipped, values may be quoted.  Keys are long option names without the
// leading dashes.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vq::InvalidArgument("cannot read config file: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw vq::InvalidArgument(path + ":" + std::to_string(lineno) +
                                ": expected `key = value`");
    const std::string key = trim_ws(line.substr(0, eq));
    std::string value = trim_ws(line.substr(eq + 1));
    if (key.empty())
      throw vq::InvalidArgument(path + ":" + std::to_string(lineno) +
                                ": empty key");
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\'')))
      value = value.substr(1, value.size() - 2);
    pairs.emplace_back(key, value);
  }
  return pairs;
}

// CLI11 only loads a --config file for the app parse() is invoked on, never
// for a subcommand, so the file is expanded here instead: each `key = value`
// line becomes a trailing `--key=value` token unless that flag was given
// explicitly.  Explicit flags therefore always win over file values.
std::vector<std::string> expand_config_args(
    const std::vector<std::string>& subcommands, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size() && sub_pos == args.size(); ++i)
    if (std::find(subcommands.begin(), subcommands.end(), args[i]) !=
        subcommands.end())
      sub_pos = i;
  if (sub_pos == args.size()) return args;

  std::string path;
  bool have_path = false;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      have_path = true;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      have_path = true;
      break;
    }
  }
  if (!have_path) return args;  // absent or valueless: CLI11 reports it

  for (const auto& [key, value] : read_config_file(path)) {
    const std::string flag = "--" + key;
    bool given = false;
    for (std::size_t i = sub_pos + 1; i < args.size() && !given; ++i)
      given = args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

void add_preprocess_opts(CLI::App* sub, vq::PipelineConfig& cfg) {
  sub->add_option("--q", cfg.hotspot.q, "hotspot z-score clamp threshold")
      ->capture_default_str();
  sub->add_option("--smooth-radius", cfg.smooth_radius, "box filter radius")
      ->capture_default_str();
  sub->add_option("--segment-level", cfg.segment_level,
                  "lung threshold as a fraction of the image maximum")
      ->capture_default_str();
}

void add_ga_opts(CLI::App* sub, vq::GAConfig& ga) {
  sub->add_option("--ga-population", ga.population, "GA population size")
      ->capture_default_str();
  sub->add_option("--ga-generations", ga.generations, "GA generations")
      ->capture_default_str();
  sub->add_option("--ga-crossover-rate", ga.crossover_rate,
                  "blend crossover probability")
      ->capture_default_str();
  sub->add_option("--ga-mutation-rate", ga.mutation_rate,
                  "per-gene mutation probability")
      ->capture_default_str();
  sub->add_option("--ga-elitism", ga.elitism, "elites copied each generation")
      ->capture_default_str();
  sub->add_option("--ga-tournament", ga.tournament,
                  "tournament size for parent selection")
      ->capture_default_str();
}

void add_hmc_opts(CLI::App* sub, vq::HmcConfig& hmc) {
  sub->add_option("--hmc-step", hmc.step_size, "leapfrog step size")
      ->capture_default_str();
  sub->add_option("--hmc-leapfrog", hmc.n_leapfrog, "leapfrog steps per proposal")
      ->capture_default_str();
  sub->add_option("--hmc-burnin", hmc.n_burnin, "discarded leading proposals")
      ->capture_default_str();
  sub->add_option("--hmc-committee", hmc.n_committee, "retained networks")
      ->capture_default_str();
  sub->add_option("--hmc-thin", hmc.thin, "keep every thin-th proposal")
      ->capture_default_str();
  sub->add_option("--hmc-alpha", hmc.prior_alpha, "Gaussian prior precision")
      ->capture_default_str();
  sub->add_option("--hmc-beta", hmc.noise_beta, "output noise precision")
      ->capture_default_str();
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string out;
  std::uint64_t seed = 0;
  int n_neg = 49, n_int = 56, n_high = 20;
  int image_size = 64;
  int int_defects = 1, high_defects = 3;
  double radius_min = 2.5, radius_max = 3.5;
  bool radius_given = false;
  double defect_depth = 0.6;
  double noise_sigma = 8.0;
  bool artifacts = true;
  bool misalign = false;
  double misalign_scale = 0.03, misalign_rot = 3.0, misalign_shift = 3.0;
};

int run_generate(const GenerateOpts& o) {
  vq::PhantomSpec base;
  base.image_size = o.image_size;
  base.defect_depth = o.defect_depth;
  base.noise_sigma = o.noise_sigma;
  base.throat_artifact = o.artifacts;
  base.stomach_artifact = o.artifacts;
  base.hotspot_artifact = o.artifacts;
  // Radius defaults are sized for 64x64; scale them with the image unless
  // the caller pinned them explicitly.
  double rmin = o.radius_min, rmax = o.radius_max;
  if (!o.radius_given) {
    rmin *= o.image_size / 64.0;
    rmax *= o.image_size / 64.0;
  }
  base.defect_radius_min = rmin;
  base.defect_radius_max = rmax;

  vq::DatasetSpec ds;
  ds.negative = base;
  ds.intermediate = base;
  ds.high = base;
  ds.negative.defect_count = 0;
  ds.intermediate.defect_count = o.int_defects;
  ds.high.defect_count = o.high_defects;
  ds.n_negative = o.n_neg;
  ds.n_intermediate = o.n_int;
  ds.n_high = o.n_high;
  ds.randomize_misalignment = o.misalign;
  ds.misalign_scale_range = o.misalign_scale;
  ds.misalign_rot_range = o.misalign_rot;
  ds.misalign_shift_range = o.misalign_shift;
  ds.seed = o.seed;

  fs::create_directories(o.out);
  const std::vector<vq::CaseStudy> cases = vq::generate_dataset(ds);
  vq::write_dataset(cases, o.out);
  std::cout << "generated " << cases.size() << " cases in " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessOpts {
  std::string manifest;
  std::string out;
  vq::PipelineConfig cfg;
};

int run_preprocess(const PreprocessOpts& o) {
  const std::vector<vq::CaseFiles> files = vq::read_manifest(o.manifest);
  const std::string base_dir = fs::path(o.manifest).parent_path().string();
  fs::create_directories(o.out);

  std::vector<vq::CaseStudy> studies;
  studies.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    const vq::CaseStudy raw = vq::load_case(files[i], base_dir);
    vq::PreprocessedCase pre = vq::preprocess_case(raw, o.cfg);
    for (int v = 0; v < vq::kNumViews; ++v) {
      vq::write_pgm(vq::mask_to_image(pre.vent_masks[v]),
                    join(o.out, mask_name(i, 'v', v)));
      vq::write_pgm(vq::mask_to_image(pre.perf_masks[v]),
                    join(o.out, mask_name(i, 'q', v)));
    }
    studies.push_back(std::move(pre.study));
  }
  vq::write_dataset(studies, o.out);
  std::cout << "preprocessed " << studies.size() << " cases into " << o.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// align

struct AlignOpts {
  std::string manifest;
  std::string out;
  vq::PipelineConfig cfg;
};

int run_align(const AlignOpts& o) {
  const std::vector<vq::CaseFiles> files = vq::read_manifest(o.manifest);
  const std::string base_dir = fs::path(o.manifest).parent_path().string();
  fs::create_directories(o.out);

  std::vector<vq::CaseStudy> aligned;
  aligned.reserve(files.size());
  std::vector<vq::TransformRecord> records;
  for (std::size_t i = 0; i < files.size(); ++i) {
    vq::PreprocessedCase pre;
    pre.study = vq::load_case(files[i], base_dir);
    for (int v = 0; v < vq::kNumViews; ++v) {
      pre.vent_masks[v] = vq::mask_from_image(
          vq::read_pgm(join(base_dir, mask_name(i, 'v', v))));
      pre.perf_masks[v] = vq::mask_from_image(
          vq::read_pgm(join(base_dir, mask_name(i, 'q', v))));
    }
    vq::AlignedCase ac = vq::align_case(pre, o.cfg, i);
    for (int v = 0; v < vq::kNumViews; ++v) {
      const vq::TransformParams& t = ac.views[v].transform;
      std::cout << fmt_g(t.scale) << '\t' << fmt_g(t.rotation_deg) << '\t'
                << fmt_g(t.tx) << '\t' << fmt_g(t.ty) << '\t'
                << fmt_g(ac.views[v].fitness) << "\n";
      records.push_back({vq::case_id_for_index(i),
                         vq::kViewNames[static_cast<std::size_t>(v)],
                         ac.views[v]});
    }
    aligned.push_back(std::move(ac.study));
  }
  vq::write_dataset(aligned, o.out);
  vq::write_transforms(records, join(o.out, "transforms.tsv"));
  return 0;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesOpts {
  std::string manifest;
  std::string val_manifest;
  std::string out;
  vq::PipelineConfig cfg;
};

int run_features(const FeaturesOpts& o) {
  std::vector<vq::CaseStudy> all = vq::load_dataset(o.manifest);
  std::vector<vq::CaseStudy> train, val;
  std::vector<std::string> train_ids, val_ids;
  if (!o.val_manifest.empty()) {
    train = std::move(all);
    val = vq::load_dataset(o.val_manifest);
    for (std::size_t i = 0; i < train.size(); ++i)
      train_ids.push_back(vq::case_id_for_index(i));
    for (std::size_t i = 0; i < val.size(); ++i)
      val_ids.push_back(vq::case_id_for_index(i));
  } else {
    const std::vector<vq::CaseLabel> labels = vq::dataset_labels(all);
    const vq::SplitIndices split = vq::split_dataset(
        labels, o.cfg.train_fraction, vq::derive_seed(o.cfg.seed, "split"));
    for (int idx : split.train) {
      train.push_back(all[static_cast<std::size_t>(idx)]);
      train_ids.push_back(vq::case_id_for_index(static_cast<std::size_t>(idx)));
    }
    for (int idx : split.validation) {
      val.push_back(all[static_cast<std::size_t>(idx)]);
      val_ids.push_back(vq::case_id_for_index(static_cast<std::size_t>(idx)));
    }
  }

  fs::create_directories(o.out);
  const Eigen::MatrixXd train_mat = vq::case_matrix(train, o.cfg.image_size);
  const vq::FeatureModel model =
      vq::fit_features(train_mat, vq::dataset_labels(train), o.cfg);
  vq::save_pca(model.pca, join(o.out, "pca.txt"));
  vq::save_sof(model.sof, join(o.out, "sof.txt"));
  vq::save_scaler(model.scaler, join(o.out, "scaler.txt"));

  vq::FeatureTable train_table;
  train_table.case_ids = std::move(train_ids);
  train_table.labels = vq::dataset_labels(train);
  train_table.features = vq::transform_features(model, train_mat);
  vq::write_feature_table(train_table, join(o.out, "features_train.tsv"));

  vq::FeatureTable val_table;
  val_table.case_ids = std::move(val_ids);
  val_table.labels = vq::dataset_labels(val);
  val_table.features =
      vq::transform_features(model, vq::case_matrix(val, o.cfg.image_size));
  vq::write_feature_table(val_table, join(o.out, "features_val.tsv"));

  std::cout << "components " << model.pca.n_components << "\n"
            << "inputs " << model.sof.chosen_indices.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string features;
  std::string out;
  vq::PipelineConfig cfg;
};

int run_train(const TrainOpts& o) {
  const vq::FeatureTable table = vq::read_feature_table(o.features);
  fs::create_directories(o.out);
  const vq::Committee committee =
      vq::train_model(table.features, table.labels, o.cfg);
  vq::save_committee(join(o.out, "committee.txt"), committee);
  vq::write_predictions(vq::predict_table(committee, table),
                        join(o.out, "train_predictions.tsv"));
  std::cout << "acceptance_rate " << fmt_g(committee.acceptance_rate) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
  std::string committee;
  std::string features;
  std::string out;
};

int run_predict(const PredictOpts& o) {
  const vq::Committee committee = vq::load_committee(o.committee);
  const vq::FeatureTable table = vq::read_feature_table(o.features);
  if (table.features.cols() != committee.shape.n_in)
    throw vq::InvalidArgument(
        "predict: committee expects " + std::to_string(committee.shape.n_in) +
        " inputs but " + o.features + " has " +
        std::to_string(table.features.cols()));
  fs::create_directories(o.out);
  vq::write_predictions(vq::predict_table(committee, table),
                        join(o.out, "predictions.tsv"));
  std::cout << "predicted " << table.case_ids.size() << " cases\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
  std::string predictions;
  std::string out;
};

int run_evaluate(const EvaluateOpts& o) {
  const std::vector<vq::PredictionRow> rows =
      vq::read_predictions(o.predictions);
  const vq::EvaluationReport report = vq::evaluate_rows(rows);
  fs::create_directories(o.out);
  vq::write_metrics(report, join(o.out, "metrics.tsv"));
  vq::write_roc(report.grouped, join(o.out, "roc.tsv"));
  std::cout << "auc " << fmt_g(report.grouped.auc) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
  std::string manifest;
  std::string val_manifest;
  std::string out;
  std::vector<int> sizes{16, 32, 64};
  std::vector<int> inputs{10, 20, 30};
  std::vector<double> vrs{0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  vq::PipelineConfig cfg;
};

int run_sweep_cmd(const SweepOpts& o) {
  std::vector<vq::CaseStudy> raw_train = vq::load_dataset(o.manifest);
  std::vector<vq::CaseStudy> raw_val;
  if (!o.val_manifest.empty()) {
    raw_val = vq::load_dataset(o.val_manifest);
  } else {
    const std::vector<vq::CaseLabel> labels = vq::dataset_labels(raw_train);
    const vq::SplitIndices split = vq::split_dataset(
        labels, o.cfg.train_fraction, vq::derive_seed(o.cfg.seed, "split"));
    std::vector<vq::CaseStudy> tr, vl;
    for (int idx : split.train)
      tr.push_back(std::move(raw_train[static_cast<std::size_t>(idx)]));
    for (int idx : split.validation)
      vl.push_back(std::move(raw_train[static_cast<std::size_t>(idx)]));
    raw_train = std::move(tr);
    raw_val = std::move(vl);
  }

  // Preprocessing and alignment do not depend on the grid; run them once.
  std::vector<vq::CaseStudy> train_aligned, val_aligned;
  std::size_t case_index = 0;
  for (const vq::CaseStudy& c : raw_train) {
    train_aligned.push_back(
        vq::align_case(vq::preprocess_case(c, o.cfg), o.cfg, case_index++)
            .study);
  }
  for (const vq::CaseStudy& c : raw_val) {
    val_aligned.push_back(
        vq::align_case(vq::preprocess_case(c, o.cfg), o.cfg, case_index++)
            .study);
  }

  const std::vector<vq::SweepRow> rows = vq::run_sweep(
      train_aligned, val_aligned, o.sizes, o.inputs, o.vrs, o.cfg);
  fs::create_directories(o.out);
  vq::write_sweep(rows, join(o.out, "sweep.tsv"));
  vq::write_sweep_summary(rows, join(o.out, "sweep_summary.tsv"));
  std::cout << "cells " << rows.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench-table1

struct BenchOpts {
  int size = 256;
  int seeds = 5;
  std::uint64_t seed = 0;
  vq::GAConfig ga;
};

int run_bench(const BenchOpts& o) {
  if (o.seeds < 1) throw vq::InvalidArgument("bench: seeds must be >= 1");
  const vq::GrayImage phantom = vq::shepp_logan(o.size);
  const vq::TransformParams truth{0.9, 6.5, 25.0, 15.0};
  const vq::GrayImage target = vq::apply_transform(phantom, truth);

  const std::array<const char*, 4> names{"scale", "rotation_deg", "tx", "ty"};
  const std::array<double, 4> actual{truth.scale, truth.rotation_deg, truth.tx,
                                     truth.ty};
  double worst = 0.0;
  for (int s = 0; s < o.seeds; ++s) {
    vq::GAConfig ga = o.ga;
    ga.seed = vq::derive_seed(o.seed, "bench", static_cast<std::uint64_t>(s));
    const vq::AlignResult r = vq::ga_align(phantom, target, ga);
    const std::array<double, 4> found{r.transform.scale,
                                      r.transform.rotation_deg, r.transform.tx,
                                      r.transform.ty};
    std::printf("seed %d (fitness %.4f)\n", s, r.fitness);
    std::printf("parameter\tactual\tfound\terror_pct\n");
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double err =
          std::fabs(found[k] - actual[k]) / std::fabs(actual[k]) * 100.0;
      worst = std::max(worst, err);
      std::printf("%s\t%.4g\t%.6g\t%.2f\n", names[k], actual[k], found[k], err);
    }
    std::printf("\n");
  }
  std::printf("worst relative error: %.2f%%\n", worst);
  std::printf("result: %s\n", worst <= 10.0 ? "PASS" : "FAIL");
  return worst <= 10.0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ventilation/perfusion scan analysis pipeline"};
  app.require_subcommand(1);

  GenerateOpts gen;
  CLI::App* sub_gen =
      app.add_subcommand("generate", "generate a synthetic phantom dataset");
  add_config_opt(sub_gen);
  sub_gen->add_option("--out", gen.out, "output directory")->required();
  sub_gen->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  sub_gen->add_option("--n-neg", gen.n_neg, "negative cases")
      ->capture_default_str();
  sub_gen->add_option("--n-int", gen.n_int, "intermediate cases")
      ->capture_default_str();
  sub_gen->add_option("--n-high", gen.n_high, "high-probability cases")
      ->capture_default_str();
  sub_gen->add_option("--image-size", gen.image_size, "square image size")
      ->capture_default_str();
  sub_gen->add_option("--int-defects", gen.int_defects,
                      "defects per intermediate case")
      ->capture_default_str();
  sub_gen->add_option("--high-defects", gen.high_defects,
                      "defects per high-probability case")
      ->capture_default_str();
  CLI::Option* rmin_opt =
      sub_gen->add_option("--defect-radius-min", gen.radius_min,
                          "defect radius lower bound, pixels at 64x64")
          ->capture_default_str();
  CLI::Option* rmax_opt =
      sub_gen->add_option("--defect-radius-max", gen.radius_max,
                          "defect radius upper bound, pixels at 64x64")
          ->capture_default_str();
  sub_gen->add_option("--defect-depth", gen.defect_depth,
                      "fractional perfusion drop inside defects")
      ->capture_default_str();
  sub_gen->add_option("--noise-sigma", gen.noise_sigma,
                      "Gaussian pixel noise sigma")
      ->capture_default_str();
  sub_gen->add_flag("--artifacts,!--no-artifacts", gen.artifacts,
                    "add throat/stomach/hotspot artifacts to ventilation");
  sub_gen->add_flag("--misalign", gen.misalign,
                    "draw a random ventilation-vs-perfusion offset per case");
  sub_gen->add_option("--misalign-scale", gen.misalign_scale,
                      "misalignment scale range (1 +/- r)")
      ->capture_default_str();
  sub_gen->add_option("--misalign-rot", gen.misalign_rot,
                      "misalignment rotation range, degrees")
      ->capture_default_str();
  sub_gen->add_option("--misalign-shift", gen.misalign_shift,
                      "misalignment shift range, pixels")
      ->capture_default_str();

  PreprocessOpts pre;
  CLI::App* sub_pre = app.add_subcommand(
      "preprocess", "stretch, smooth, segment, and clean a dataset");
  add_config_opt(sub_pre);
  sub_pre->add_option("--manifest", pre.manifest, "dataset manifest")
      ->required();
  sub_pre->add_option("--out", pre.out, "output directory")->required();
  add_preprocess_opts(sub_pre, pre.cfg);

  AlignOpts ali;
  CLI::App* sub_ali = app.add_subcommand(
      "align", "align each ventilation view onto its perfusion view");
  add_config_opt(sub_ali);
  sub_ali->add_option("--manifest", ali.manifest, "preprocessed manifest")
      ->required();
  sub_ali->add_option("--out", ali.out, "output directory")->required();
  sub_ali->add_option("--seed", ali.cfg.seed, "master seed")
      ->capture_default_str();
  add_ga_opts(sub_ali, ali.cfg.ga);

  FeaturesOpts fea;
  CLI::App* sub_fea = app.add_subcommand(
      "features", "fit the feature model and emit feature tables");
  add_config_opt(sub_fea);
  sub_fea->add_option("--manifest", fea.manifest, "aligned dataset manifest")
      ->required();
  sub_fea->add_option("--val-manifest", fea.val_manifest,
                      "separate validation manifest (otherwise split)");
  sub_fea->add_option("--out", fea.out, "output directory")->required();
  sub_fea->add_option("--image-size", fea.cfg.image_size,
                      "feature-vector image size")
      ->capture_default_str();
  sub_fea->add_option("--vr", fea.cfg.vr, "retained variability fraction")
      ->capture_default_str();
  sub_fea->add_option("--n-inputs", fea.cfg.n_inputs,
                      "network inputs kept by the separation score")
      ->capture_default_str();
  sub_fea->add_option("--train-fraction", fea.cfg.train_fraction,
                      "training fraction when splitting")
      ->capture_default_str();
  sub_fea->add_option("--seed", fea.cfg.seed, "master seed")
      ->capture_default_str();

  TrainOpts tra;
  CLI::App* sub_tra =
      app.add_subcommand("train", "sample the committee from the posterior");
  add_config_opt(sub_tra);
  sub_tra->add_option("--features", tra.features, "training feature table")
      ->required();
  sub_tra->add_option("--out", tra.out, "output directory")->required();
  sub_tra->add_option("--seed", tra.cfg.seed, "master seed")
      ->capture_default_str();
  add_hmc_opts(sub_tra, tra.cfg.hmc);

  PredictOpts prd;
  CLI::App* sub_prd =
      app.add_subcommand("predict", "run a committee over a feature table");
  add_config_opt(sub_prd);
  sub_prd->add_option("--committee", prd.committee, "committee file")
      ->required();
  sub_prd->add_option("--features", prd.features, "feature table")->required();
  sub_prd->add_option("--out", prd.out, "output directory")->required();

  EvaluateOpts eva;
  CLI::App* sub_eva = app.add_subcommand(
      "evaluate", "score predictions: confusion metrics, ROC, AUC");
  add_config_opt(sub_eva);
  sub_eva->add_option("--predictions", eva.predictions, "predictions file")
      ->required();
  sub_eva->add_option("--out", eva.out, "output directory")->required();

  SweepOpts swe;
  CLI::App* sub_swe = app.add_subcommand(
      "sweep", "grid sweep over image size, input count, and vr");
  add_config_opt(sub_swe);
  sub_swe->add_option("--manifest", swe.manifest, "raw dataset manifest")
      ->required();
  sub_swe->add_option("--val-manifest", swe.val_manifest,
                      "separate validation manifest (otherwise split)");
  sub_swe->add_option("--out", swe.out, "output directory")->required();
  sub_swe->add_option("--sizes", swe.sizes, "image sizes")
      ->delimiter(',')
      ->capture_default_str();
  sub_swe->add_option("--inputs", swe.inputs, "input counts")
      ->delimiter(',')
      ->capture_default_str();
  sub_swe->add_option("--vr-grid", swe.vrs, "retained variability values")
      ->delimiter(',')
      ->capture_default_str();
  sub_swe->add_option("--train-fraction", swe.cfg.train_fraction,
                      "training fraction when splitting")
      ->capture_default_str();
  sub_swe->add_option("--seed", swe.cfg.seed, "master seed")
      ->capture_default_str();
  add_preprocess_opts(sub_swe, swe.cfg);
  add_ga_opts(sub_swe, swe.cfg.ga);
  add_hmc_opts(sub_swe, swe.cfg.hmc);

  BenchOpts ben;
  CLI::App* sub_ben = app.add_subcommand(
      "bench-table1", "alignment benchmark on the head phantom");
  add_config_opt(sub_ben);
  sub_ben->add_option("--size", ben.size, "phantom size")->capture_default_str();
  sub_ben->add_option("--seeds", ben.seeds, "number of GA seeds")
      ->capture_default_str();
  sub_ben->add_option("--seed", ben.seed, "master seed")->capture_default_str();
  add_ga_opts(sub_ben, ben.ga);

  std::vector<std::string> sub_names;
  for (const CLI::App* s :
       app.get_subcommands([](const CLI::App*) { return true; }))
    sub_names.push_back(s->get_name());

  std::vector<std::string> args;
  try {
    args = expand_config_args(sub_names, argc, argv);
  } catch (const vq::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::reverse(args.begin(), args.end());  // the vector overload wants this

  try {
    app.name(argv[0]);
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    gen.radius_given = rmin_opt->count() > 0 || rmax_opt->count() > 0;
    if (sub_gen->parsed()) return run_generate(gen);
    if (sub_pre->parsed()) return run_preprocess(pre);
    if (sub_ali->parsed()) return run_align(ali);
    if (sub_fea->parsed()) return run_features(fea);
    if (sub_tra->parsed()) return run_train(tra);
    if (sub_prd->parsed()) return run_predict(prd);
    if (sub_eva->parsed()) return run_evaluate(eva);
    if (sub_swe->parsed()) return run_sweep_cmd(swe);
    if (sub_ben->parsed()) return run_bench(ben);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const vq::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const vq::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vq::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
