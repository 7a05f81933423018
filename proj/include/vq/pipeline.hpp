#pragma once

// End-to-end orchestration: per-case preprocessing, ventilation-onto-
// perfusion alignment, feature model fitting, committee training and
// prediction, evaluation, and the hyperparameter sweep.  Also the TSV and
// sidecar-file formats shared by the command-line stages.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vq/eval.hpp"
#include "vq/features.hpp"
#include "vq/ga.hpp"
#include "vq/hmc.hpp"
#include "vq/phantom.hpp"
#include "vq/preprocess.hpp"

namespace vq {

struct PipelineConfig {
  HotspotParams hotspot;      // ventilation hotspot clamp
  int smooth_radius = 1;      // box filter radius
  double segment_level = 0.35;  // fraction-of-max threshold
  GAConfig ga;                // per-view aligner
  int image_size = 64;        // feature-vector resolution
  double vr = 0.90;           // retained variability
  int n_inputs = 30;          // network inputs chosen by separation score
  HmcConfig hmc;              // committee sampler
  double train_fraction = 0.70;
  std::uint64_t seed = 0;     // master seed; stage seeds derive from it
};

void check_pipeline_config(const PipelineConfig& cfg);

// -------------------------------------------------------------------------
// Stage drivers

struct PreprocessedCase {
  CaseStudy study;  // stretched, smoothed, cleaned, restretched
  std::array<LungMask, kNumViews> vent_masks;
  std::array<LungMask, kNumViews> perf_masks;
};

// Per view and modality: stretch, smooth, segment; clamp ventilation
// hotspots; zero everything outside the union of the pair's masks; final
// restretch so both modalities span the full scale again.
PreprocessedCase preprocess_case(const CaseStudy& raw,
                                 const PipelineConfig& cfg);

struct AlignedCase {
  CaseStudy study;  // ventilation resampled onto the perfusion frame
  std::array<AlignResult, kNumViews> views;
};

// Aligns each binarized ventilation mask onto its perfusion counterpart;
// the GA seed derives from (master seed, case index, view index).
AlignedCase align_case(const PreprocessedCase& pre, const PipelineConfig& cfg,
                       std::size_t case_index);

// -------------------------------------------------------------------------
// Feature model (dimensionality reduction + input choice + scaling)

struct FeatureModel {
  PcaModel pca;
  SofSelection sof;      // over principal-component coordinates
  FeatureScaler scaler;  // over the chosen coordinates
};

// Raw case vectors as rows.  The input count is clamped to the number of
// retained components when the requested count exceeds it.
FeatureModel fit_features(const Eigen::MatrixXd& train_vectors,
                          const std::vector<CaseLabel>& labels,
                          const PipelineConfig& cfg);

Eigen::VectorXd apply_features(const FeatureModel& model,
                               const Eigen::VectorXd& raw_vector);
Eigen::MatrixXd transform_features(const FeatureModel& model,
                                   const Eigen::MatrixXd& raw_rows);

// Concatenated per-view subtraction vectors, one row per case.
Eigen::MatrixXd case_matrix(const std::vector<CaseStudy>& aligned,
                            int image_size);
std::vector<CaseLabel> dataset_labels(const std::vector<CaseStudy>& cases);

// -------------------------------------------------------------------------
// Training / prediction / evaluation

// Samples the committee from the weight posterior; chain seed derives from
// the master seed.
Committee train_model(const Eigen::MatrixXd& scaled_features,
                      const std::vector<CaseLabel>& labels,
                      const PipelineConfig& cfg);

struct FeatureTable {
  std::vector<std::string> case_ids;
  std::vector<CaseLabel> labels;
  Eigen::MatrixXd features;  // rows parallel to case_ids
};

struct PredictionRow {
  std::string case_id;
  CaseLabel actual = CaseLabel::Negative;
  CommitteeOutput output;
};

std::vector<PredictionRow> predict_table(const Committee& committee,
                                         const FeatureTable& table);

struct EvaluationReport {
  // Indexed by class in label order: negative, intermediate, high.
  std::array<ConfusionCounts, 3> counts;
  std::array<ClassMetrics, 3> per_class;
  RocCurve grouped;  // intermediate+high positive, scored by committee mean
};

EvaluationReport evaluate_rows(const std::vector<PredictionRow>& rows);

// -------------------------------------------------------------------------
// Hyperparameter sweep (image size x input count x retained variability)

struct SweepCell {
  int image_size = 0;
  int n_inputs = 0;
  double vr = 0.0;
};

struct SweepRow {
  SweepCell cell;
  double auc = 0.0;
  std::array<ClassMetrics, 3> per_class;  // negative, intermediate, high
};

// Full train/validate per grid cell, row order fixed by grid order
// (sizes outermost, then input counts, then vr); each cell runs under a
// seed derived from (master seed, cell index).
std::vector<SweepRow> run_sweep(const std::vector<CaseStudy>& train_aligned,
                                const std::vector<CaseStudy>& val_aligned,
                                const std::vector<int>& image_sizes,
                                const std::vector<int>& input_counts,
                                const std::vector<double>& vr_grid,
                                const PipelineConfig& base);

// -------------------------------------------------------------------------
// File formats shared by the CLI stages

GrayImage mask_to_image(const LungMask& mask);  // 0 / 255
LungMask mask_from_image(const GrayImage& img);

std::string case_id_for_index(std::size_t index);  // "case0007"

void write_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable read_feature_table(const std::string& path);

void write_predictions(const std::vector<PredictionRow>& rows,
                       const std::string& path);
std::vector<PredictionRow> read_predictions(const std::string& path);

void write_metrics(const EvaluationReport& report, const std::string& path);
void write_roc(const RocCurve& curve, const std::string& path);

struct TransformRecord {
  std::string case_id;
  std::string view;
  AlignResult result;
};

void write_transforms(const std::vector<TransformRecord>& records,
                      const std::string& path);

void write_sweep(const std::vector<SweepRow>& rows, const std::string& path);
// Per-column max/min/mean across the grid, skipping undefined entries.
void write_sweep_summary(const std::vector<SweepRow>& rows,
                         const std::string& path);

}  // namespace vq
