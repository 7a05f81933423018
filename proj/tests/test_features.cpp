#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vq/error.hpp"
#include "vq/features.hpp"
#include "vq/rng.hpp"

using namespace vq;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// subtraction

TEST_CASE("subtract: perfusion minus ventilation, signed") {
  GrayImage p = make_image(2, 2, 60.0);
  GrayImage v = make_image(2, 2, 100.0);
  const SubtractionImage sub = subtract(p, v);
  CHECK((sub.values == -40.0).all());
  CHECK(sub.width() == 2);
  CHECK(sub.height() == 2);
}

TEST_CASE("subtract: identical images vanish; mismatch rejected") {
  const GrayImage img = make_image(3, 3, 42.0);
  CHECK((subtract(img, img).values == 0.0).all());
  CHECK_THROWS_AS(subtract(img, make_image(4, 3, 0.0)), InvalidArgument);
}

TEST_CASE("defect_magnitude: sums only the ventilation excess") {
  SubtractionImage sub;
  sub.values = PixelArray::Zero(2, 2);
  CHECK(defect_magnitude(sub) == 0.0);
  sub.values(0, 1) = -40.0;
  sub.values(1, 0) = +25.0;  // perfusion excess is not a defect
  CHECK(defect_magnitude(sub) == 40.0);
}

TEST_CASE("case_vector: six stacked views, resized and flattened") {
  CaseStudy cs;
  for (int v = 0; v < kNumViews; ++v) {
    cs.ventilation[v] = make_image(32, 32, 10.0);
    cs.perfusion[v] = make_image(32, 32, 10.0);
  }
  // Distinct constant difference per view to pin the layout.
  for (int v = 0; v < kNumViews; ++v)
    cs.perfusion[v].pixels.setConstant(10.0 + 5.0 * v);

  const Eigen::VectorXd vec16 = case_vector(cs, 16);
  CHECK(vec16.size() == 6 * 16 * 16);
  const Eigen::VectorXd vec64 = case_vector(cs, 64);
  CHECK(vec64.size() == 6 * 64 * 64);

  for (int v = 0; v < kNumViews; ++v) {
    const double want = 5.0 * v;  // (perfusion - ventilation) in view v
    CHECK(vec16(v * 256) == doctest::Approx(want));
    CHECK(vec16(v * 256 + 255) == doctest::Approx(want));
  }
}

TEST_CASE("case_vector: all-equal modalities give the zero vector") {
  CaseStudy cs;
  for (int v = 0; v < kNumViews; ++v) {
    cs.ventilation[v] = make_image(16, 16, 99.0);
    cs.perfusion[v] = make_image(16, 16, 99.0);
  }
  CHECK((case_vector(cs, 16).array() == 0.0).all());
}

// ---------------------------------------------------------------------------
// PCA

TEST_CASE("pca_fit: matches a dense covariance eigendecomposition") {
  Rng rng(42);
  const Eigen::MatrixXd data = random_matrix(rng, 12, 6);
  const PcaModel model = pca_fit(data, 1.0);

  // Oracle: direct eigendecomposition of the sample covariance.
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / (data.rows() - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  REQUIRE(es.info() == Eigen::Success);

  REQUIRE(model.n_components == 6);
  for (int i = 0; i < 6; ++i) {
    const double want = es.eigenvalues()(5 - i);  // descending order
    CHECK(model.eigenvalues(i) == doctest::Approx(want).epsilon(1e-9));
    // Eigenvectors match up to sign.
    const double dot =
        std::fabs(model.eigenvectors.col(i).dot(es.eigenvectors().col(5 - i)));
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK((model.mean - mean.transpose()).norm() < 1e-12);
}

TEST_CASE("pca_fit: orthonormal columns, descending nonnegative spectrum") {
  Rng rng(43);
  const Eigen::MatrixXd data = random_matrix(rng, 10, 40);
  const PcaModel model = pca_fit(data, 1.0);
  const Eigen::MatrixXd gram =
      model.eigenvectors.transpose() * model.eigenvectors;
  CHECK((gram - Eigen::MatrixXd::Identity(model.n_components,
                                          model.n_components))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  for (int i = 0; i < model.n_components; ++i) {
    CHECK(model.eigenvalues(i) >= 0.0);
    if (i > 0) CHECK(model.eigenvalues(i) <= model.eigenvalues(i - 1));
  }
}

TEST_CASE("pca_fit: two distinct points leave one nonzero eigenvalue") {
  Eigen::MatrixXd data(2, 5);
  data.row(0) << 1, 2, 3, 4, 5;
  data.row(1) << 2, 3, 4, 5, 6;
  const PcaModel model = pca_fit(data, 1.0);
  CHECK(model.n_components == 1);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
    nonzero += (model.eigenvalues(i) > 0.0);
  CHECK(nonzero == 1);
}

TEST_CASE("pca_fit: collinear 3-D data needs a single component") {
  Eigen::MatrixXd data(6, 3);
  for (int i = 0; i < 6; ++i) {
    const double t = 0.7 * i - 2.0;
    data.row(i) << 2.0 * t + 1.0, -t + 3.0, 0.5 * t;
  }
  for (double vr : {0.5, 0.9, 1.0}) {
    const PcaModel model = pca_fit(data, vr);
    CHECK(model.n_components == 1);
  }
}

TEST_CASE("pca_fit: retained fraction reaches vr; count grows with vr") {
  Rng rng(44);
  const Eigen::MatrixXd data = random_matrix(rng, 20, 100);
  int previous = 0;
  for (double vr : {0.70, 0.75, 0.80, 0.85, 0.90, 0.95}) {
    const PcaModel model = pca_fit(data, vr);
    const double total = model.eigenvalues.sum();
    const double kept = model.eigenvalues.head(model.n_components).sum();
    CHECK(kept / total >= vr);
    if (model.n_components > 1) {
      const double fewer = model.eigenvalues.head(model.n_components - 1).sum();
      CHECK(fewer / total < vr);  // minimality of the component count
    }
    CHECK(model.n_components >= previous);
    previous = model.n_components;
  }
}

TEST_CASE("pca_fit: domain errors") {
  Rng rng(45);
  const Eigen::MatrixXd data = random_matrix(rng, 5, 4);
  CHECK_THROWS_AS(pca_fit(data, 0.0), InvalidArgument);
  CHECK_THROWS_AS(pca_fit(data, 1.5), InvalidArgument);
  CHECK_THROWS_AS(pca_fit(data.topRows(1), 0.9), InvalidArgument);
}

TEST_CASE("pca_project: mean maps to zero, components to unit axes") {
  Rng rng(46);
  const Eigen::MatrixXd data = random_matrix(rng, 9, 7);
  const PcaModel model = pca_fit(data, 1.0);

  CHECK(pca_project(model, model.mean).cwiseAbs().maxCoeff() < 1e-10);

  for (int k = 0; k < std::min(3, model.n_components); ++k) {
    const Eigen::VectorXd v = model.mean + model.eigenvectors.col(k);
    const Eigen::VectorXd z = pca_project(model, v);
    for (int i = 0; i < model.n_components; ++i)
      CHECK(z(i) == doctest::Approx(i == k ? 1.0 : 0.0).epsilon(1e-8));
  }
}

TEST_CASE("pca: residual after reconstruction is orthogonal to the basis") {
  Rng rng(47);
  const Eigen::MatrixXd data = random_matrix(rng, 8, 12);
  const PcaModel model = pca_fit(data, 0.6);
  const Eigen::VectorXd v = random_matrix(rng, 12, 1);
  const Eigen::VectorXd z = pca_project(model, v);
  const Eigen::VectorXd recon = model.mean + model.eigenvectors * z;
  const Eigen::VectorXd residual = v - recon;
  for (int i = 0; i < model.n_components; ++i)
    CHECK(std::fabs(residual.dot(model.eigenvectors.col(i))) < 1e-8);
}

TEST_CASE("pca: total reconstruction error equals the discarded variance") {
  Rng rng(48);
  const Eigen::MatrixXd data = random_matrix(rng, 15, 30);
  const PcaModel model = pca_fit(data, 0.7);

  double sq_err = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const Eigen::VectorXd v = data.row(r).transpose();
    const Eigen::VectorXd recon =
        model.mean + model.eigenvectors * pca_project(model, v);
    sq_err += (v - recon).squaredNorm();
  }
  const double discarded =
      model.eigenvalues.sum() -
      model.eigenvalues.head(model.n_components).sum();
  const double want = discarded * (data.rows() - 1.0);
  CHECK(sq_err == doctest::Approx(want).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// SoF selection

namespace {

// One-feature class sample builder.
Eigen::MatrixXd column(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

// Independent separation score: best pair of class means/stds per feature.
double sof_oracle(const std::vector<Eigen::MatrixXd>& classes, int feature) {
  double best = 0.0;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      const auto col_a = classes[a].col(feature);
      const auto col_b = classes[b].col(feature);
      const double mu_a = col_a.mean(), mu_b = col_b.mean();
      const double sd_a = std::sqrt((col_a.array() - mu_a).square().sum() /
                                    (col_a.size() - 1.0));
      const double sd_b = std::sqrt((col_b.array() - mu_b).square().sum() /
                                    (col_b.size() - 1.0));
      const double denom = 0.5 * (sd_a + sd_b);
      if (denom > 0.0) best = std::max(best, std::fabs(mu_a - mu_b) / denom);
    }
  return best;
}

}  // namespace

TEST_CASE("sof_select: identical distributions score zero") {
  const std::vector<Eigen::MatrixXd> classes{column({1, 2, 3}),
                                             column({1, 2, 3})};
  const SofSelection sel = sof_select(classes, 1);
  CHECK(sel.scores(0) == 0.0);
}

TEST_CASE("sof_select: unit-spread means 1 and 3 score exactly 2") {
  // Sample std of {0,1,2} and {2,3,4} is exactly 1.
  const std::vector<Eigen::MatrixXd> classes{column({0, 1, 2}),
                                             column({2, 3, 4})};
  const SofSelection sel = sof_select(classes, 1);
  CHECK(sel.scores(0) == 2.0);
}

TEST_CASE("sof_select: a strong pair beats uniform mediocrity") {
  // Feature 0 separates classes 0 and 2 with delta = 8; feature 1 never
  // exceeds delta = 2. n_inputs = 1 must choose feature 0.
  Eigen::MatrixXd c0(3, 2), c1(3, 2), c2(3, 2);
  c0.col(0) = column({-2, -2.5, -1.5});  // mean -2, sd 0.5
  c2.col(0) = column({2, 2.5, 1.5});     // mean +2, sd 0.5 -> delta = 8
  c1.col(0) = column({0, 0.5, -0.5});
  c0.col(1) = column({0, 1, 2});  // mean 1, sd 1
  c1.col(1) = column({1, 2, 3});  // mean 2, sd 1
  c2.col(1) = column({2, 3, 4});  // mean 3, sd 1 -> best pair delta = 2
  const std::vector<Eigen::MatrixXd> classes{c0, c1, c2};
  const SofSelection sel = sof_select(classes, 1);
  REQUIRE(sel.chosen_indices.size() == 1);
  CHECK(sel.chosen_indices[0] == 0);
  CHECK(sel.scores(0) == doctest::Approx(8.0));
}

TEST_CASE("sof_select: top-k matches exhaustive ranking on random tables") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const int n_features = 3 + static_cast<int>(rng.below(8));
    const int n_classes = 2 + static_cast<int>(rng.below(2));
    std::vector<Eigen::MatrixXd> classes;
    for (int c = 0; c < n_classes; ++c) {
      Eigen::MatrixXd m(4, n_features);
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          m(i, j) = rng.normal(c * 0.5, 1.0 + 0.1 * static_cast<double>(j));
      classes.push_back(m);
    }
    const int k = 1 + static_cast<int>(rng.below(n_features));
    const SofSelection sel = sof_select(classes, k);
    REQUIRE(static_cast<int>(sel.chosen_indices.size()) == k);

    // Exhaustive oracle ranking (score descending, index ascending on ties).
    std::vector<int> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(n_features);
    for (int f = 0; f < n_features; ++f) scores[f] = sof_oracle(classes, f);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores[a] > scores[b];
    });

    for (int i = 0; i < k; ++i) CHECK(sel.chosen_indices[i] == order[i]);
    for (int f = 0; f < n_features; ++f)
      CHECK(sel.scores(f) == doctest::Approx(scores[f]).epsilon(1e-12));
  }
}

TEST_CASE("sof_select: domain errors") {
  const std::vector<Eigen::MatrixXd> one_class{column({1, 2})};
  CHECK_THROWS_AS(sof_select(one_class, 1), InvalidArgument);
  const std::vector<Eigen::MatrixXd> classes{column({1, 2}), column({3, 4})};
  CHECK_THROWS_AS(sof_select(classes, 0), InvalidArgument);
  CHECK_THROWS_AS(sof_select(classes, 2), InvalidArgument);  // only 1 feature
}

// ---------------------------------------------------------------------------
// scaler

TEST_CASE("scaler: two-point feature maps to +-1/sqrt(2)") {
  Eigen::MatrixXd training(2, 1);
  training << 0.0, 2.0;
  const FeatureScaler scaler = scaler_fit(training);
  REQUIRE(scaler.kept.size() == 1);
  CHECK(scaler.mean(0) == 1.0);
  CHECK(scaler.stddev(0) == std::sqrt(2.0));  // sample convention (n-1)

  Eigen::VectorXd v(1);
  v << 0.0;
  CHECK(scaler_apply(scaler, v)(0) == -1.0 / std::sqrt(2.0));
  v << 2.0;
  CHECK(scaler_apply(scaler, v)(0) == 1.0 / std::sqrt(2.0));
}

TEST_CASE("scaler: constant features are dropped, not divided by zero") {
  Eigen::MatrixXd training(3, 3);
  training.col(0) << 1, 2, 3;
  training.col(1) << 7, 7, 7;  // constant
  training.col(2) << -1, 0, 1;
  const FeatureScaler scaler = scaler_fit(training);
  CHECK(scaler.kept == std::vector<int>{0, 2});
  CHECK(scaler.dropped == std::vector<int>{1});

  Eigen::VectorXd v(3);
  v << 2, 7, 0;
  const Eigen::VectorXd out = scaler_apply(scaler, v);
  CHECK(out.size() == 2);
  CHECK(out(0) == 0.0);  // at the mean
  CHECK(out(1) == 0.0);
}

TEST_CASE("scaler: training data standardizes to mean 0, sample std 1") {
  Rng rng(53);
  Eigen::MatrixXd training(10, 4);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      training(i, j) = rng.normal(3.0 * static_cast<double>(j), 2.0);
  const FeatureScaler scaler = scaler_fit(training);
  REQUIRE(scaler.kept.size() == 4);

  Eigen::MatrixXd scaled(10, 4);
  for (Eigen::Index i = 0; i < 10; ++i)
    scaled.row(i) = scaler_apply(scaler, training.row(i).transpose());
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(scaled.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
    const double var =
        scaled.col(j).squaredNorm() / (scaled.rows() - 1.0);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("scaler: mean vector maps to zero") {
  Rng rng(54);
  Eigen::MatrixXd training = random_matrix(rng, 6, 3);
  const FeatureScaler scaler = scaler_fit(training);
  const Eigen::VectorXd mean = training.colwise().mean().transpose();
  CHECK(scaler_apply(scaler, mean).cwiseAbs().maxCoeff() < 1e-14);
}

// ---------------------------------------------------------------------------
// serialization

TEST_CASE("pca/sof/scaler: save-load round-trips are exact") {
  vqtest::TempDir tmp;
  Rng rng(55);
  const Eigen::MatrixXd data = random_matrix(rng, 8, 11);
  const PcaModel pca = pca_fit(data, 0.85);
  save_pca(pca, tmp.file("pca.txt"));
  const PcaModel pca2 = load_pca(tmp.file("pca.txt"));
  CHECK(pca2.n_components == pca.n_components);
  CHECK(pca2.vr == pca.vr);
  CHECK((pca2.mean - pca.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pca2.eigenvalues - pca.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pca2.eigenvectors - pca.eigenvectors).cwiseAbs().maxCoeff() == 0.0);

  std::vector<Eigen::MatrixXd> classes{random_matrix(rng, 5, 4),
                                       random_matrix(rng, 5, 4)};
  const SofSelection sof = sof_select(classes, 2);
  save_sof(sof, tmp.file("sof.txt"));
  const SofSelection sof2 = load_sof(tmp.file("sof.txt"));
  CHECK(sof2.chosen_indices == sof.chosen_indices);
  CHECK((sof2.scores - sof.scores).cwiseAbs().maxCoeff() == 0.0);

  const FeatureScaler scaler = scaler_fit(data);
  save_scaler(scaler, tmp.file("scaler.txt"));
  const FeatureScaler scaler2 = load_scaler(tmp.file("scaler.txt"));
  CHECK(scaler2.kept == scaler.kept);
  CHECK(scaler2.dropped == scaler.dropped);
  CHECK((scaler2.mean - scaler.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((scaler2.stddev - scaler.stddev).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca/sof/scaler: corrupted files are DataError") {
  vqtest::TempDir tmp;
  vqtest::spit(tmp.file("bad.txt"), "not a model\n");
  CHECK_THROWS_AS(load_pca(tmp.file("bad.txt")), DataError);
  CHECK_THROWS_AS(load_sof(tmp.file("bad.txt")), DataError);
  CHECK_THROWS_AS(load_scaler(tmp.file("bad.txt")), DataError);
  CHECK_THROWS_AS(load_pca(tmp.file("missing.txt")), DataError);
}
