#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vq/error.hpp"
#include "vq/pipeline.hpp"
#include "vq/rng.hpp"

using namespace vq;

namespace {

// Small chain so pipeline-level tests stay fast; statistical quality is
// covered by the sampler's own tests.
HmcConfig tiny_hmc() {
  HmcConfig hmc;
  hmc.step_size = 0.05;
  hmc.n_leapfrog = 5;
  hmc.n_burnin = 10;
  hmc.n_committee = 6;
  hmc.thin = 1;
  return hmc;
}

GAConfig tiny_ga() {
  GAConfig ga;
  ga.population = 20;
  ga.generations = 10;
  return ga;
}

// A case with hand-set label and random (but valid) view images; enough for
// the feature/training layers, which never look at anatomy.
CaseStudy random_study(Rng& rng, int size, CaseLabel label) {
  CaseStudy cs;
  cs.label = label;
  for (int v = 0; v < kNumViews; ++v) {
    cs.ventilation[v] = vqtest::random_image(rng, size, size);
    cs.perfusion[v] = vqtest::random_image(rng, size, size);
  }
  return cs;
}

std::vector<CaseStudy> random_dataset(Rng& rng, int size, int per_class) {
  std::vector<CaseStudy> cases;
  for (CaseLabel cls :
       {CaseLabel::Negative, CaseLabel::Intermediate, CaseLabel::High})
    for (int i = 0; i < per_class; ++i)
      cases.push_back(random_study(rng, size, cls));
  return cases;
}

}  // namespace

TEST_CASE("check_pipeline_config: domain checks on every stage knob") {
  PipelineConfig cfg;
  CHECK_NOTHROW(check_pipeline_config(cfg));

  auto bad = cfg;
  bad.segment_level = 0.0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.segment_level = 1.0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.smooth_radius = -1;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.image_size = 0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.vr = 0.0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.vr = 1.5;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.n_inputs = 0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.train_fraction = 1.0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.hmc.step_size = 0.0;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
  bad = cfg;
  bad.ga.population = 1;
  CHECK_THROWS_AS(check_pipeline_config(bad), InvalidArgument);
}

TEST_CASE("preprocess_case: stretched, masked, label preserved") {
  PhantomSpec spec;
  spec.image_size = 48;
  spec.hotspot_artifact = true;
  spec.throat_artifact = true;
  spec.noise_sigma = 4.0;
  spec.seed = 5;
  const CaseStudy raw = generate_case(spec);

  PipelineConfig cfg;
  const PreprocessedCase pre = preprocess_case(raw, cfg);
  CHECK(pre.study.label == raw.label);

  for (int v = 0; v < kNumViews; ++v) {
    const GrayImage& vent = pre.study.ventilation[v];
    const GrayImage& perf = pre.study.perfusion[v];
    // Final restretch spans the full scale again.
    CHECK(vent.pixels.minCoeff() == 0.0);
    CHECK(vent.pixels.maxCoeff() == 255.0);
    CHECK(perf.pixels.minCoeff() == 0.0);
    CHECK(perf.pixels.maxCoeff() == 255.0);

    CHECK(pre.vent_masks[v].count() > 0);
    CHECK(pre.perf_masks[v].count() > 0);

    // Everything outside the union of the two lung masks is cleared.
    const BitArray outside =
        !(pre.vent_masks[v].bits || pre.perf_masks[v].bits);
    CHECK((outside && (vent.pixels > 0.0)).count() == 0);
    CHECK((outside && (perf.pixels > 0.0)).count() == 0);
  }
}

TEST_CASE("align_case: recovers a high-overlap pose on a misaligned phantom") {
  PhantomSpec spec;
  spec.image_size = 32;
  spec.noise_sigma = 3.0;
  spec.misalignment.tx = 2.0;
  spec.misalignment.ty = -1.5;
  spec.misalignment.rotation_deg = 2.0;
  spec.seed = 6;
  const CaseStudy raw = generate_case(spec);

  PipelineConfig cfg;
  cfg.ga = tiny_ga();
  const PreprocessedCase pre = preprocess_case(raw, cfg);
  const AlignedCase aligned = align_case(pre, cfg, 0);

  CHECK(aligned.study.label == raw.label);
  for (int v = 0; v < kNumViews; ++v) {
    CHECK(aligned.views[v].fitness > 0.5);
    CHECK(aligned.views[v].fitness <= 1.0);
    const TransformParams& t = aligned.views[v].transform;
    CHECK(t.scale >= cfg.ga.bounds[0].lo);
    CHECK(t.scale <= cfg.ga.bounds[0].hi);
    // Perfusion is the fixed frame and passes through untouched.
    CHECK((aligned.study.perfusion[v].pixels - pre.study.perfusion[v].pixels)
              .abs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("case_matrix: one case vector per row") {
  Rng rng(101);
  const std::vector<CaseStudy> cases = {
      random_study(rng, 24, CaseLabel::Negative),
      random_study(rng, 24, CaseLabel::High)};
  const Eigen::MatrixXd m = case_matrix(cases, 16);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 6 * 16 * 16);
  for (int i = 0; i < 2; ++i)
    CHECK((m.row(i).transpose() - case_vector(cases[static_cast<std::size_t>(i)], 16))
              .cwiseAbs()
              .maxCoeff() == 0.0);

  const std::vector<CaseLabel> labels = dataset_labels(cases);
  CHECK(labels ==
        std::vector<CaseLabel>{CaseLabel::Negative, CaseLabel::High});
  CHECK_THROWS_AS(case_matrix({}, 16), InvalidArgument);
}

TEST_CASE("fit_features: input count clamps to retained components") {
  Rng rng(103);
  Eigen::MatrixXd x(12, 24);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i / 24, i % 24) = rng.normal();
  std::vector<CaseLabel> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i)
      labels.push_back(static_cast<CaseLabel>(c));

  PipelineConfig cfg;
  cfg.vr = 0.95;
  cfg.n_inputs = 50;  // far more than 12 samples can supply
  const FeatureModel model = fit_features(x, labels, cfg);
  CHECK(model.pca.n_components <= 11);
  CHECK(static_cast<int>(model.sof.chosen_indices.size()) ==
        model.pca.n_components);
  for (int idx : model.sof.chosen_indices) {
    CHECK(idx >= 0);
    CHECK(idx < model.pca.n_components);
  }

  cfg.n_inputs = 3;
  const FeatureModel small = fit_features(x, labels, cfg);
  CHECK(small.sof.chosen_indices.size() == 3);
}

TEST_CASE("transform_features: training matrix comes out standardized") {
  Rng rng(107);
  Eigen::MatrixXd x(15, 30);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i / 30, i % 30) = rng.normal(0.0, 5.0);
  std::vector<CaseLabel> labels;
  for (int i = 0; i < 15; ++i)
    labels.push_back(static_cast<CaseLabel>(i % 3));

  PipelineConfig cfg;
  cfg.vr = 0.9;
  cfg.n_inputs = 5;
  const FeatureModel model = fit_features(x, labels, cfg);
  const Eigen::MatrixXd scaled = transform_features(model, x);
  REQUIRE(scaled.cols() == 5);
  REQUIRE(scaled.rows() == 15);
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double mean = scaled.col(j).mean();
    const double var =
        (scaled.col(j).array() - mean).square().sum() / (scaled.rows() - 1.0);
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Row-by-row application agrees with the batch path.
  const Eigen::VectorXd row3 = apply_features(model, x.row(3).transpose());
  CHECK((row3.transpose() - scaled.row(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train/predict/evaluate: tiny synthetic round trip") {
  Rng rng(109);
  Eigen::MatrixXd features(9, 3);
  for (Eigen::Index i = 0; i < features.size(); ++i)
    features(i / 3, i % 3) = rng.normal();
  std::vector<CaseLabel> labels;
  for (int i = 0; i < 9; ++i) labels.push_back(static_cast<CaseLabel>(i / 3));

  PipelineConfig cfg;
  cfg.hmc = tiny_hmc();
  cfg.seed = 17;
  const Committee committee = train_model(features, labels, cfg);
  CHECK(committee.members.size() == 6);
  CHECK(committee.shape.n_in == 3);
  CHECK(committee.acceptance_rate > 0.0);

  FeatureTable table;
  table.features = features;
  table.labels = labels;
  for (int i = 0; i < 9; ++i) table.case_ids.push_back(case_id_for_index(static_cast<std::size_t>(i)));

  const std::vector<PredictionRow> rows = predict_table(committee, table);
  REQUIRE(rows.size() == 9);
  for (const PredictionRow& row : rows) {
    CHECK(row.output.mean > 0.0);
    CHECK(row.output.mean < 1.0);
    CHECK(row.output.ci_lo <= row.output.mean);
    CHECK(row.output.ci_hi >= row.output.mean);
  }

  const EvaluationReport report = evaluate_rows(rows);
  for (int c = 0; c < 3; ++c) {
    const ConfusionCounts& k = report.counts[static_cast<std::size_t>(c)];
    CHECK(k.tp + k.fp + k.tn + k.fn == 9);
    CHECK(k.tp + k.fn == 3);  // three actual cases per class
  }
  CHECK(report.grouped.auc >= 0.0);
  CHECK(report.grouped.auc <= 1.0);

  // Same master seed, same committee.
  const Committee again = train_model(features, labels, cfg);
  REQUIRE(again.members.size() == committee.members.size());
  for (std::size_t m = 0; m < again.members.size(); ++m)
    CHECK((again.members[m] - committee.members[m]).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("case_id_for_index: zero-padded to four digits") {
  CHECK(case_id_for_index(0) == "case0000");
  CHECK(case_id_for_index(7) == "case0007");
  CHECK(case_id_for_index(123) == "case0123");
  CHECK(case_id_for_index(12345) == "case12345");
}

TEST_CASE("feature table: write/read round trip is lossless") {
  FeatureTable table;
  table.case_ids = {"case0000", "case0001", "case0002"};
  table.labels = {CaseLabel::Negative, CaseLabel::Intermediate,
                  CaseLabel::High};
  table.features.resize(3, 4);
  table.features << 1.0 / 3.0, -2.5e-17, 0.0, 1e200,
      -1.0, 3.141592653589793, 255.0, -0.1,
      7e-300, 2.0, -4.0, 0.5;

  vqtest::TempDir dir;
  const std::string path = dir.file("features.tsv");
  write_feature_table(table, path);

  const FeatureTable loaded = read_feature_table(path);
  CHECK(loaded.case_ids == table.case_ids);
  CHECK(loaded.labels == table.labels);
  REQUIRE(loaded.features.rows() == 3);
  REQUIRE(loaded.features.cols() == 4);
  CHECK((loaded.features - table.features).cwiseAbs().maxCoeff() == 0.0);

  // Header names the columns.
  const std::string text = vqtest::slurp(path);
  CHECK(text.rfind("case_id\tlabel\tx0\tx1\tx2\tx3\n", 0) == 0);
}

TEST_CASE("read_feature_table: malformed inputs raise data errors") {
  vqtest::TempDir dir;
  CHECK_THROWS_AS(read_feature_table(dir.file("absent.tsv")), DataError);

  const std::string bad_header = dir.file("h.tsv");
  vqtest::spit(bad_header, "id\tlabel\tx0\ncase0000\tneg\t1.0\n");
  CHECK_THROWS_AS(read_feature_table(bad_header), DataError);

  const std::string ragged = dir.file("r.tsv");
  vqtest::spit(ragged, "case_id\tlabel\tx0\tx1\ncase0000\tneg\t1.0\n");
  CHECK_THROWS_AS(read_feature_table(ragged), DataError);

  const std::string bad_label = dir.file("l.tsv");
  vqtest::spit(bad_label, "case_id\tlabel\tx0\ncase0000\tmaybe\t1.0\n");
  CHECK_THROWS_AS(read_feature_table(bad_label), DataError);

  const std::string bad_number = dir.file("n.tsv");
  vqtest::spit(bad_number, "case_id\tlabel\tx0\ncase0000\tneg\tabc\n");
  CHECK_THROWS_AS(read_feature_table(bad_number), DataError);

  const std::string empty = dir.file("e.tsv");
  vqtest::spit(empty, "case_id\tlabel\tx0\n");
  CHECK_THROWS_AS(read_feature_table(empty), DataError);
}

TEST_CASE("predictions: write/read round trip is lossless") {
  std::vector<PredictionRow> rows(2);
  rows[0].case_id = "case0000";
  rows[0].actual = CaseLabel::High;
  rows[0].output.mean = 0.8123456789012345;
  rows[0].output.std = 0.0625;
  rows[0].output.ci_lo = rows[0].output.mean - 1.96 * 0.0625;
  rows[0].output.ci_hi = rows[0].output.mean + 1.96 * 0.0625;
  rows[0].output.predicted = CaseLabel::High;
  rows[1].case_id = "case0001";
  rows[1].actual = CaseLabel::Negative;
  rows[1].output.mean = 1.0 / 7.0;
  rows[1].output.predicted = CaseLabel::Negative;

  vqtest::TempDir dir;
  const std::string path = dir.file("predictions.tsv");
  write_predictions(rows, path);

  const std::vector<PredictionRow> loaded = read_predictions(path);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].case_id == rows[i].case_id);
    CHECK(loaded[i].actual == rows[i].actual);
    CHECK(loaded[i].output.mean == rows[i].output.mean);
    CHECK(loaded[i].output.std == rows[i].output.std);
    CHECK(loaded[i].output.ci_lo == rows[i].output.ci_lo);
    CHECK(loaded[i].output.ci_hi == rows[i].output.ci_hi);
    CHECK(loaded[i].output.predicted == rows[i].output.predicted);
  }

  const std::string truncated = dir.file("t.tsv");
  vqtest::spit(truncated,
               "case_id\tlabel\tmean\tstd\tci_lo\tci_hi\tpredicted\n"
               "case0000\tneg\t0.1\t0.2\n");
  CHECK_THROWS_AS(read_predictions(truncated), DataError);
}

TEST_CASE("write_metrics / write_roc: stable tabular layouts") {
  std::vector<PredictionRow> rows(4);
  const CaseLabel acts[4] = {CaseLabel::Negative, CaseLabel::Negative,
                             CaseLabel::Intermediate, CaseLabel::High};
  const double means[4] = {0.1, 0.3, 0.6, 0.9};
  for (int i = 0; i < 4; ++i) {
    rows[static_cast<std::size_t>(i)].case_id = case_id_for_index(static_cast<std::size_t>(i));
    rows[static_cast<std::size_t>(i)].actual = acts[i];
    rows[static_cast<std::size_t>(i)].output.mean = means[i];
    rows[static_cast<std::size_t>(i)].output.predicted = classify_mean(means[i]);
  }
  const EvaluationReport report = evaluate_rows(rows);

  vqtest::TempDir dir;
  write_metrics(report, dir.file("metrics.tsv"));
  const std::string metrics_text = vqtest::slurp(dir.file("metrics.tsv"));
  CHECK(metrics_text.rfind(
            "class\ttp\tfp\ttn\tfn\tsensitivity\tspecificity\tppv\tnpv\n",
            0) == 0);
  CHECK(std::count(metrics_text.begin(), metrics_text.end(), '\n') == 4);
  CHECK(metrics_text.find("\nneg\t") != std::string::npos);
  CHECK(metrics_text.find("\nint\t") != std::string::npos);
  CHECK(metrics_text.find("\nhigh\t") != std::string::npos);

  write_roc(report.grouped, dir.file("roc.tsv"));
  const std::string roc_text = vqtest::slurp(dir.file("roc.tsv"));
  CHECK(roc_text.rfind("fpr\ttpr\n", 0) == 0);
  CHECK(std::count(roc_text.begin(), roc_text.end(), '\n') ==
        static_cast<long>(report.grouped.points.size()) + 1);
}

TEST_CASE("write_transforms: one row per view record") {
  std::vector<TransformRecord> records(2);
  records[0].case_id = "case0000";
  records[0].view = "ant";
  // Exactly representable doubles so the serialized text is predictable.
  records[0].result.transform = {0.875, 3.5, 1.0, -2.0};
  records[0].result.fitness = 0.75;
  records[1].case_id = "case0000";
  records[1].view = "post";
  records[1].result.fitness = 0.91;

  vqtest::TempDir dir;
  write_transforms(records, dir.file("transforms.tsv"));
  const std::string text = vqtest::slurp(dir.file("transforms.tsv"));
  CHECK(text.rfind("case_id\tview\tscale\trotation_deg\ttx\tty\tfitness\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.find("case0000\tant\t0.875\t3.5\t1\t-2\t0.75") !=
        std::string::npos);
}

TEST_CASE("mask round trip through 0/255 images") {
  Rng rng(113);
  LungMask mask;
  mask.bits.resize(9, 7);
  for (Eigen::Index i = 0; i < mask.bits.size(); ++i)
    mask.bits(i / 7, i % 7) = rng.uniform() < 0.5;
  const GrayImage img = mask_to_image(mask);
  CHECK(img.pixels.maxCoeff() <= 255.0);
  const LungMask back = mask_from_image(img);
  CHECK((back.bits == mask.bits).all());
}

TEST_CASE("run_sweep: full grid in fixed order, deterministic") {
  Rng rng(127);
  const std::vector<CaseStudy> train = random_dataset(rng, 24, 2);
  const std::vector<CaseStudy> val = random_dataset(rng, 24, 2);

  PipelineConfig base;
  base.hmc = tiny_hmc();
  base.hmc.n_committee = 4;
  base.seed = 3;

  const std::vector<int> sizes = {16, 32, 64};
  const std::vector<int> inputs = {10, 20, 30};
  const std::vector<double> vrs = {0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  const std::vector<SweepRow> rows = run_sweep(train, val, sizes, inputs, vrs, base);
  REQUIRE(rows.size() == 54);

  std::size_t r = 0;
  for (int size : sizes)
    for (int n_inputs : inputs)
      for (double vr : vrs) {
        CHECK(rows[r].cell.image_size == size);
        CHECK(rows[r].cell.n_inputs == n_inputs);
        CHECK(rows[r].cell.vr == vr);
        CHECK(rows[r].auc >= 0.0);
        CHECK(rows[r].auc <= 1.0);
        ++r;
      }

  const std::vector<SweepRow> again =
      run_sweep(train, val, sizes, inputs, vrs, base);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(rows[i].auc == again[i].auc);

  vqtest::TempDir dir;
  write_sweep(rows, dir.file("sweep.tsv"));
  const std::string text = vqtest::slurp(dir.file("sweep.tsv"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 55);
  CHECK(text.rfind("image_size\tn_inputs\tvr\tauc\t", 0) == 0);

  write_sweep_summary(rows, dir.file("summary.tsv"));
  const std::string summary = vqtest::slurp(dir.file("summary.tsv"));
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
  CHECK(summary.rfind("stat\t", 0) == 0);
}

TEST_CASE("run_sweep: empty grid is an error") {
  Rng rng(131);
  const std::vector<CaseStudy> train = random_dataset(rng, 16, 2);
  const std::vector<CaseStudy> val = random_dataset(rng, 16, 2);
  PipelineConfig base;
  base.hmc = tiny_hmc();
  CHECK_THROWS_AS(run_sweep(train, val, {}, {10}, {0.9}, base),
                  InvalidArgument);
}
