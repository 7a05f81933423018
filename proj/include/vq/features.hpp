#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "vq/image.hpp"
#include "vq/phantom.hpp"

namespace vq {

// Per-pixel perfusion minus ventilation of an aligned pair; negative values
// mark areas with more ventilation than perfusion (the embolism signature).
struct SubtractionImage {
  PixelArray values;

  Eigen::Index width() const { return values.cols(); }
  Eigen::Index height() const { return values.rows(); }
};

SubtractionImage subtract(const GrayImage& perfusion,
                          const GrayImage& ventilation);

// Sum of |value| over the negative pixels.
double defect_magnitude(const SubtractionImage& sub);

// Concatenates the six per-view subtraction images, each resized to
// image_size^2 and flattened row-major: a vector of length 6*image_size^2.
Eigen::VectorXd case_vector(const CaseStudy& aligned_case, int image_size);

// PCA fitted by the snapshot (Gram matrix) method, appropriate when the
// sample count is far below the dimensionality. Eigenvalues are sample
// variances (n-1 denominator), sorted descending and clamped at zero;
// eigenvectors holds the retained components as orthonormal columns.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // dim x n_components
  int n_components = 0;
  double vr = 1.0;
};

// data: one sample per row. n_components becomes the smallest count whose
// cumulative variance fraction reaches vr.
PcaModel pca_fit(const Eigen::MatrixXd& data, double vr);
Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& v);

// Class-separation scores: delta = |mu1 - mu2| / ((sigma1 + sigma2)/2) per
// feature and class pair; a feature's score is its best pair. chosen_indices
// are the top-n features by score, ties broken toward the lower index.
struct SofSelection {
  std::vector<int> chosen_indices;
  Eigen::VectorXd scores;  // per candidate feature
};

SofSelection sof_select(const std::vector<Eigen::MatrixXd>& class_samples,
                        int n_inputs);

// Per-feature z-scoring with training statistics; zero-spread features are
// dropped (their indices recorded) rather than divided by zero.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<int> kept;
  std::vector<int> dropped;
};

FeatureScaler scaler_fit(const Eigen::MatrixXd& training);
Eigen::VectorXd scaler_apply(const FeatureScaler& scaler,
                             const Eigen::VectorXd& v);

// Versioned whitespace text formats, printed at 17 significant digits so
// round-trips reproduce the doubles exactly.
void save_pca(const PcaModel& model, const std::string& path);
PcaModel load_pca(const std::string& path);
void save_sof(const SofSelection& sel, const std::string& path);
SofSelection load_sof(const std::string& path);
void save_scaler(const FeatureScaler& scaler, const std::string& path);
FeatureScaler load_scaler(const std::string& path);

}  // namespace vq
