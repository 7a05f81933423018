#include "vq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "vq/error.hpp"
#include "vq/rng.hpp"
#include "vq/transform.hpp"

namespace vq {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::vector<std::string> split_tsv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double(const std::string& token, const std::string& path) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw DataError(path + ": bad numeric field '" + token + "'");
  return v;
}

constexpr std::array<CaseLabel, 3> kClassOrder = {
    CaseLabel::Negative, CaseLabel::Intermediate, CaseLabel::High};

}  // namespace

void check_pipeline_config(const PipelineConfig& cfg) {
  if (!(cfg.hotspot.q > 0.0))
    throw InvalidArgument("pipeline: hotspot q must be > 0");
  if (cfg.smooth_radius < 0)
    throw InvalidArgument("pipeline: smooth_radius must be >= 0");
  if (!(cfg.segment_level > 0.0 && cfg.segment_level < 1.0))
    throw InvalidArgument("pipeline: segment_level must be in (0, 1)");
  check_ga_config(cfg.ga);
  if (cfg.image_size < 1)
    throw InvalidArgument("pipeline: image_size must be >= 1");
  if (!(cfg.vr > 0.0) || cfg.vr > 1.0)
    throw InvalidArgument("pipeline: vr must be in (0, 1]");
  if (cfg.n_inputs < 1)
    throw InvalidArgument("pipeline: n_inputs must be >= 1");
  check_hmc_config(cfg.hmc);
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw InvalidArgument("pipeline: train_fraction must be in (0, 1)");
}

// ---------------------------------------------------------------------------
// Stage drivers

PreprocessedCase preprocess_case(const CaseStudy& raw,
                                 const PipelineConfig& cfg) {
  PreprocessedCase out;
  out.study.label = raw.label;
  for (int v = 0; v < kNumViews; ++v) {
    GrayImage vent = smooth(fshs(raw.ventilation[v]), cfg.smooth_radius);
    GrayImage perf = smooth(fshs(raw.perfusion[v]), cfg.smooth_radius);
    out.vent_masks[v] = segment_lung(vent, cfg.segment_level);
    out.perf_masks[v] = segment_lung(perf, cfg.segment_level);

    // Cleanup keeps anything lung-like in either modality so that true
    // perfusion defects are not cut away by the perfusion mask alone.
    LungMask pair;
    pair.bits = out.vent_masks[v].bits || out.perf_masks[v].bits;

    vent = remove_hotspots(vent, pair, cfg.hotspot);
    out.study.ventilation[v] = fshs(remove_artifacts(vent, pair));
    out.study.perfusion[v] = fshs(remove_artifacts(perf, pair));
  }
  return out;
}

AlignedCase align_case(const PreprocessedCase& pre, const PipelineConfig& cfg,
                       std::size_t case_index) {
  AlignedCase out;
  out.study.label = pre.study.label;
  for (int v = 0; v < kNumViews; ++v) {
    const GrayImage reference =
        binarize(pre.study.ventilation[v], pre.vent_masks[v]);
    const GrayImage target = binarize(pre.study.perfusion[v], pre.perf_masks[v]);
    GAConfig ga = cfg.ga;
    ga.seed = derive_seed(cfg.seed, "align",
                          case_index * static_cast<std::size_t>(kNumViews) +
                              static_cast<std::size_t>(v));
    out.views[v] = ga_align(reference, target, ga);
    out.study.ventilation[v] =
        apply_transform(pre.study.ventilation[v], out.views[v].transform);
    out.study.perfusion[v] = pre.study.perfusion[v];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature model

Eigen::MatrixXd case_matrix(const std::vector<CaseStudy>& aligned,
                            int image_size) {
  if (aligned.empty()) throw InvalidArgument("case_matrix: empty dataset");
  const Eigen::Index dim =
      static_cast<Eigen::Index>(kNumViews) * image_size * image_size;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(aligned.size()), dim);
  for (std::size_t i = 0; i < aligned.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) =
        case_vector(aligned[i], image_size).transpose();
  return rows;
}

std::vector<CaseLabel> dataset_labels(const std::vector<CaseStudy>& cases) {
  std::vector<CaseLabel> labels(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) labels[i] = cases[i].label;
  return labels;
}

FeatureModel fit_features(const Eigen::MatrixXd& train_vectors,
                          const std::vector<CaseLabel>& labels,
                          const PipelineConfig& cfg) {
  if (static_cast<std::size_t>(train_vectors.rows()) != labels.size())
    throw InvalidArgument("fit_features: label count mismatch");
  if (cfg.n_inputs < 1)
    throw InvalidArgument("fit_features: n_inputs must be >= 1");

  FeatureModel model;
  model.pca = pca_fit(train_vectors, cfg.vr);

  Eigen::MatrixXd proj(train_vectors.rows(), model.pca.n_components);
  for (Eigen::Index i = 0; i < train_vectors.rows(); ++i)
    proj.row(i) =
        pca_project(model.pca, train_vectors.row(i).transpose()).transpose();

  std::vector<Eigen::MatrixXd> groups;
  for (CaseLabel cls : kClassOrder) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<Eigen::Index>(i));
    if (members.empty()) continue;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(members.size()), proj.cols());
    for (std::size_t r = 0; r < members.size(); ++r)
      m.row(static_cast<Eigen::Index>(r)) = proj.row(members[r]);
    groups.push_back(std::move(m));
  }

  const int n_selected =
      std::min(cfg.n_inputs, model.pca.n_components);
  model.sof = sof_select(groups, n_selected);

  Eigen::MatrixXd selected(proj.rows(),
                           static_cast<Eigen::Index>(n_selected));
  for (int j = 0; j < n_selected; ++j)
    selected.col(j) = proj.col(model.sof.chosen_indices[static_cast<std::size_t>(j)]);
  model.scaler = scaler_fit(selected);
  return model;
}

Eigen::VectorXd apply_features(const FeatureModel& model,
                               const Eigen::VectorXd& raw_vector) {
  const Eigen::VectorXd proj = pca_project(model.pca, raw_vector);
  Eigen::VectorXd selected(
      static_cast<Eigen::Index>(model.sof.chosen_indices.size()));
  for (std::size_t j = 0; j < model.sof.chosen_indices.size(); ++j)
    selected(static_cast<Eigen::Index>(j)) = proj(model.sof.chosen_indices[j]);
  return scaler_apply(model.scaler, selected);
}

Eigen::MatrixXd transform_features(const FeatureModel& model,
                                   const Eigen::MatrixXd& raw_rows) {
  if (raw_rows.rows() == 0)
    throw InvalidArgument("transform_features: empty input");
  const Eigen::VectorXd first =
      apply_features(model, raw_rows.row(0).transpose());
  Eigen::MatrixXd out(raw_rows.rows(), first.size());
  out.row(0) = first.transpose();
  for (Eigen::Index i = 1; i < raw_rows.rows(); ++i)
    out.row(i) = apply_features(model, raw_rows.row(i).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Training / prediction / evaluation

Committee train_model(const Eigen::MatrixXd& scaled_features,
                      const std::vector<CaseLabel>& labels,
                      const PipelineConfig& cfg) {
  if (static_cast<std::size_t>(scaled_features.rows()) != labels.size())
    throw InvalidArgument("train_model: label count mismatch");
  Eigen::VectorXd targets(scaled_features.rows());
  for (std::size_t i = 0; i < labels.size(); ++i)
    targets(static_cast<Eigen::Index>(i)) = label_target(labels[i]);

  HmcConfig hmc = cfg.hmc;
  hmc.seed = derive_seed(cfg.seed, "train");
  const MlpShape shape{static_cast<int>(scaled_features.cols()), 5};
  return hmc_sample(shape, scaled_features, targets, hmc);
}

std::vector<PredictionRow> predict_table(const Committee& committee,
                                         const FeatureTable& table) {
  if (table.case_ids.size() != table.labels.size() ||
      static_cast<std::size_t>(table.features.rows()) != table.case_ids.size())
    throw InvalidArgument("predict_table: inconsistent feature table");
  std::vector<PredictionRow> rows(table.case_ids.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].case_id = table.case_ids[i];
    rows[i].actual = table.labels[i];
    rows[i].output = committee_predict(
        committee, table.features.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return rows;
}

EvaluationReport evaluate_rows(const std::vector<PredictionRow>& rows) {
  if (rows.empty()) throw InvalidArgument("evaluate: no predictions");
  std::vector<CaseLabel> predicted(rows.size()), actual(rows.size());
  std::vector<double> scores(rows.size());
  std::vector<bool> positive(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    predicted[i] = rows[i].output.predicted;
    actual[i] = rows[i].actual;
    scores[i] = rows[i].output.mean;
    positive[i] = rows[i].actual != CaseLabel::Negative;
  }

  EvaluationReport report;
  for (std::size_t c = 0; c < kClassOrder.size(); ++c) {
    report.counts[c] = confusion(predicted, actual, kClassOrder[c]);
    report.per_class[c] = metrics(report.counts[c]);
  }
  report.grouped = roc(scores, positive);
  return report;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepRow> run_sweep(const std::vector<CaseStudy>& train_aligned,
                                const std::vector<CaseStudy>& val_aligned,
                                const std::vector<int>& image_sizes,
                                const std::vector<int>& input_counts,
                                const std::vector<double>& vr_grid,
                                const PipelineConfig& base) {
  if (image_sizes.empty() || input_counts.empty() || vr_grid.empty())
    throw InvalidArgument("sweep: empty grid");
  const std::vector<CaseLabel> train_labels = dataset_labels(train_aligned);

  std::vector<SweepRow> rows;
  rows.reserve(image_sizes.size() * input_counts.size() * vr_grid.size());
  std::uint64_t cell_index = 0;
  for (int size : image_sizes) {
    // Raw case vectors depend only on the image size; share them across
    // the inner grid.
    const Eigen::MatrixXd train_mat = case_matrix(train_aligned, size);
    const Eigen::MatrixXd val_mat = case_matrix(val_aligned, size);
    for (int n_inputs : input_counts) {
      for (double vr : vr_grid) {
        PipelineConfig cfg = base;
        cfg.image_size = size;
        cfg.n_inputs = n_inputs;
        cfg.vr = vr;
        cfg.seed = derive_seed(base.seed, "sweep-cell", cell_index);

        const FeatureModel model = fit_features(train_mat, train_labels, cfg);
        const Eigen::MatrixXd train_x = transform_features(model, train_mat);
        const Committee committee = train_model(train_x, train_labels, cfg);

        FeatureTable val_table;
        val_table.features = transform_features(model, val_mat);
        val_table.labels = dataset_labels(val_aligned);
        val_table.case_ids.resize(val_aligned.size());
        for (std::size_t i = 0; i < val_aligned.size(); ++i)
          val_table.case_ids[i] = case_id_for_index(i);

        const EvaluationReport report =
            evaluate_rows(predict_table(committee, val_table));
        SweepRow row;
        row.cell = SweepCell{size, n_inputs, vr};
        row.auc = report.grouped.auc;
        row.per_class = report.per_class;
        rows.push_back(row);
        ++cell_index;
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// File formats

GrayImage mask_to_image(const LungMask& mask) {
  GrayImage img;
  img.levels = 256;
  img.pixels = mask.bits.cast<double>() * 255.0;
  return img;
}

LungMask mask_from_image(const GrayImage& img) {
  LungMask mask;
  mask.bits = img.pixels > 127.5;
  return mask;
}

std::string case_id_for_index(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "case%04zu", index);
  return buf;
}

void write_feature_table(const FeatureTable& table, const std::string& path) {
  if (table.case_ids.size() != table.labels.size() ||
      static_cast<std::size_t>(table.features.rows()) != table.case_ids.size())
    throw InvalidArgument("write_feature_table: inconsistent table");
  std::ofstream out = open_out(path);
  out << "case_id\tlabel";
  for (Eigen::Index j = 0; j < table.features.cols(); ++j) out << "\tx" << j;
  out << '\n';
  for (std::size_t i = 0; i < table.case_ids.size(); ++i) {
    out << table.case_ids[i] << '\t' << label_token(table.labels[i]);
    for (Eigen::Index j = 0; j < table.features.cols(); ++j)
      out << '\t' << fmt_g(table.features(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

FeatureTable read_feature_table(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": missing header line");
  const std::vector<std::string> header = split_tsv(line);
  if (header.size() < 3 || header[0] != "case_id" || header[1] != "label")
    throw DataError(path + ": bad feature-table header");
  const std::size_t n_features = header.size() - 2;

  FeatureTable table;
  std::vector<std::vector<double>> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tsv(line);
    if (fields.size() != header.size())
      throw DataError(path + ": row with " + std::to_string(fields.size()) +
                      " fields (expected " + std::to_string(header.size()) +
                      ")");
    table.case_ids.push_back(fields[0]);
    table.labels.push_back(parse_label(fields[1]));
    std::vector<double> row(n_features);
    for (std::size_t j = 0; j < n_features; ++j)
      row[j] = parse_double(fields[2 + j], path);
    values.push_back(std::move(row));
  }
  if (values.empty()) throw DataError(path + ": no data rows");
  table.features.resize(static_cast<Eigen::Index>(values.size()),
                        static_cast<Eigen::Index>(n_features));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < n_features; ++j)
      table.features(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(j)) = values[i][j];
  return table;
}

void write_predictions(const std::vector<PredictionRow>& rows,
                       const std::string& path) {
  std::ofstream out = open_out(path);
  out << "case_id\tlabel\tmean\tstd\tci_lo\tci_hi\tpredicted\n";
  for (const PredictionRow& row : rows) {
    out << row.case_id << '\t' << label_token(row.actual) << '\t'
        << fmt_g(row.output.mean) << '\t' << fmt_g(row.output.std) << '\t'
        << fmt_g(row.output.ci_lo) << '\t' << fmt_g(row.output.ci_hi) << '\t'
        << label_token(row.output.predicted) << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

std::vector<PredictionRow> read_predictions(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": missing header line");
  if (split_tsv(line).size() != 7)
    throw DataError(path + ": bad predictions header");

  std::vector<PredictionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tsv(line);
    if (fields.size() != 7)
      throw DataError(path + ": row with " + std::to_string(fields.size()) +
                      " fields (expected 7)");
    PredictionRow row;
    row.case_id = fields[0];
    row.actual = parse_label(fields[1]);
    row.output.mean = parse_double(fields[2], path);
    row.output.std = parse_double(fields[3], path);
    row.output.ci_lo = parse_double(fields[4], path);
    row.output.ci_hi = parse_double(fields[5], path);
    row.output.predicted = parse_label(fields[6]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  return rows;
}

void write_metrics(const EvaluationReport& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "class\ttp\tfp\ttn\tfn\tsensitivity\tspecificity\tppv\tnpv\n";
  for (std::size_t c = 0; c < kClassOrder.size(); ++c) {
    const ConfusionCounts& k = report.counts[c];
    const ClassMetrics& m = report.per_class[c];
    out << label_token(kClassOrder[c]) << '\t' << k.tp << '\t' << k.fp << '\t'
        << k.tn << '\t' << k.fn << '\t' << fmt_g(m.sensitivity) << '\t'
        << fmt_g(m.specificity) << '\t' << fmt_g(m.ppv) << '\t'
        << fmt_g(m.npv) << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

void write_roc(const RocCurve& curve, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "fpr\ttpr\n";
  for (const auto& [fpr, tpr] : curve.points)
    out << fmt_g(fpr) << '\t' << fmt_g(tpr) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

void write_transforms(const std::vector<TransformRecord>& records,
                      const std::string& path) {
  std::ofstream out = open_out(path);
  out << "case_id\tview\tscale\trotation_deg\ttx\tty\tfitness\n";
  for (const TransformRecord& rec : records) {
    const TransformParams& t = rec.result.transform;
    out << rec.case_id << '\t' << rec.view << '\t' << fmt_g(t.scale) << '\t'
        << fmt_g(t.rotation_deg) << '\t' << fmt_g(t.tx) << '\t' << fmt_g(t.ty)
        << '\t' << fmt_g(rec.result.fitness) << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

namespace {

const std::array<const char*, 13> kSweepMetricNames = {
    "auc",      "sens_neg", "spec_neg", "ppv_neg", "npv_neg",
    "sens_int", "spec_int", "ppv_int",  "npv_int", "sens_high",
    "spec_high", "ppv_high", "npv_high"};

std::array<double, 13> sweep_metric_values(const SweepRow& row) {
  std::array<double, 13> v{};
  v[0] = row.auc;
  for (std::size_t c = 0; c < 3; ++c) {
    const ClassMetrics& m = row.per_class[c];
    v[1 + 4 * c + 0] = m.sensitivity;
    v[1 + 4 * c + 1] = m.specificity;
    v[1 + 4 * c + 2] = m.ppv;
    v[1 + 4 * c + 3] = m.npv;
  }
  return v;
}

}  // namespace

void write_sweep(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "image_size\tn_inputs\tvr";
  for (const char* name : kSweepMetricNames) out << '\t' << name;
  out << '\n';
  for (const SweepRow& row : rows) {
    out << row.cell.image_size << '\t' << row.cell.n_inputs << '\t'
        << fmt_g(row.cell.vr);
    for (double v : sweep_metric_values(row)) out << '\t' << fmt_g(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

void write_sweep_summary(const std::vector<SweepRow>& rows,
                         const std::string& path) {
  if (rows.empty()) throw InvalidArgument("sweep summary: no rows");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 13> mx, mn, sum;
  std::array<long, 13> count{};
  mx.fill(nan);
  mn.fill(nan);
  sum.fill(0.0);
  for (const SweepRow& row : rows) {
    const std::array<double, 13> v = sweep_metric_values(row);
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (std::isnan(v[j])) continue;  // undefined cells do not aggregate
      mx[j] = std::isnan(mx[j]) ? v[j] : std::max(mx[j], v[j]);
      mn[j] = std::isnan(mn[j]) ? v[j] : std::min(mn[j], v[j]);
      sum[j] += v[j];
      ++count[j];
    }
  }

  std::ofstream out = open_out(path);
  out << "stat";
  for (const char* name : kSweepMetricNames) out << '\t' << name;
  out << '\n';
  const auto write_row = [&](const char* stat,
                             const std::array<double, 13>& values) {
    out << stat;
    for (double v : values) out << '\t' << fmt_g(v);
    out << '\n';
  };
  write_row("max", mx);
  write_row("min", mn);
  std::array<double, 13> mean;
  for (std::size_t j = 0; j < mean.size(); ++j)
    mean[j] = count[j] > 0 ? sum[j] / static_cast<double>(count[j]) : nan;
  write_row("mean", mean);
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace vq
