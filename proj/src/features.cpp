#include "vq/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "vq/error.hpp"
#include "vq/preprocess.hpp"

namespace vq {

SubtractionImage subtract(const GrayImage& perfusion,
                          const GrayImage& ventilation) {
  if (perfusion.width() != ventilation.width() ||
      perfusion.height() != ventilation.height())
    throw InvalidArgument("subtract: image dimensions differ");
  SubtractionImage out;
  out.values = perfusion.pixels - ventilation.pixels;
  return out;
}

double defect_magnitude(const SubtractionImage& sub) {
  return (sub.values < 0.0).select(-sub.values, 0.0).sum();
}

Eigen::VectorXd case_vector(const CaseStudy& aligned_case, int image_size) {
  if (image_size < 1) throw InvalidArgument("case_vector: bad image size");
  const Eigen::Index per_view =
      static_cast<Eigen::Index>(image_size) * image_size;
  Eigen::VectorXd out(kNumViews * per_view);
  for (int v = 0; v < kNumViews; ++v) {
    const SubtractionImage sub =
        subtract(aligned_case.perfusion[v], aligned_case.ventilation[v]);
    const PixelArray small = resize_bilinear(sub.values, image_size, image_size);
    // Row-major flatten.
    for (Eigen::Index y = 0; y < image_size; ++y)
      for (Eigen::Index x = 0; x < image_size; ++x)
        out(v * per_view + y * image_size + x) = small(y, x);
  }
  return out;
}

PcaModel pca_fit(const Eigen::MatrixXd& data, double vr) {
  const Eigen::Index n = data.rows(), dim = data.cols();
  if (n < 2) throw InvalidArgument("pca_fit: need at least 2 samples");
  if (!(vr > 0.0) || vr > 1.0)
    throw InvalidArgument("pca_fit: vr must be in (0, 1]");

  PcaModel model;
  model.vr = vr;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

  // Snapshot method: the n x n Gram matrix shares its nonzero spectrum with
  // the covariance; principal directions come back through X^T u / sqrt(m).
  const Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw NumericError("pca_fit: eigendecomposition failed");

  // Eigen returns ascending order; flip to descending and clamp at zero.
  Eigen::VectorXd raw = solver.eigenvalues().reverse();
  const double scale_tol = std::max(raw.maxCoeff(), 0.0) * 1e-12;
  model.eigenvalues = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    model.eigenvalues(i) = raw(i) > scale_tol ? raw(i) / (n - 1) : 0.0;

  double total = 0.0;  // sequential sum so the cumulative loop can hit it exactly
  for (Eigen::Index i = 0; i < n; ++i) total += model.eigenvalues(i);
  if (total <= 0.0) throw NumericError("pca_fit: zero total variance");

  int m = 0;
  double cum = 0.0;
  while (m < n && cum / total < vr && model.eigenvalues(m) > 0.0) {
    cum += model.eigenvalues(m);
    ++m;
  }
  model.n_components = m;

  model.eigenvectors.resize(dim, m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd u = solver.eigenvectors().col(n - 1 - i);
    const double norm = std::sqrt(raw(i));
    model.eigenvectors.col(i) = (centered.transpose() * u) / norm;
  }
  return model;
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& v) {
  if (v.size() != model.mean.size())
    throw InvalidArgument("pca_project: vector length does not match model");
  return model.eigenvectors.transpose() * (v - model.mean);
}

SofSelection sof_select(const std::vector<Eigen::MatrixXd>& class_samples,
                        int n_inputs) {
  if (class_samples.size() < 2)
    throw InvalidArgument("sof_select: need at least 2 classes");
  const Eigen::Index dim = class_samples.front().cols();
  for (const Eigen::MatrixXd& cls : class_samples) {
    if (cls.rows() < 2)
      throw InvalidArgument("sof_select: every class needs >= 2 samples");
    if (cls.cols() != dim)
      throw InvalidArgument("sof_select: feature counts differ across classes");
  }
  if (n_inputs < 1 || n_inputs > dim)
    throw InvalidArgument("sof_select: n_inputs must be in [1, feature count]");

  const std::size_t k = class_samples.size();
  std::vector<Eigen::VectorXd> mu(k), sigma(k);
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::MatrixXd& m = class_samples[c];
    mu[c] = m.colwise().mean().transpose();
    const Eigen::MatrixXd centered = m.rowwise() - mu[c].transpose();
    sigma[c] = (centered.array().square().colwise().sum() / (m.rows() - 1))
                   .sqrt()
                   .transpose();
  }

  SofSelection sel;
  sel.scores = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index f = 0; f < dim; ++f) {
    double best = 0.0;
    for (std::size_t c1 = 0; c1 + 1 < k; ++c1) {
      for (std::size_t c2 = c1 + 1; c2 < k; ++c2) {
        const double num = std::abs(mu[c1](f) - mu[c2](f));
        const double den = 0.5 * (sigma[c1](f) + sigma[c2](f));
        double delta;
        if (den == 0.0)
          delta = num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        else
          delta = num / den;
        best = std::max(best, delta);
      }
    }
    sel.scores(f) = best;
  }

  std::vector<int> order(dim);
  for (Eigen::Index f = 0; f < dim; ++f) order[f] = static_cast<int>(f);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sel.scores(a) > sel.scores(b);
  });
  sel.chosen_indices.assign(order.begin(), order.begin() + n_inputs);
  return sel;
}

FeatureScaler scaler_fit(const Eigen::MatrixXd& training) {
  const Eigen::Index n = training.rows(), dim = training.cols();
  if (n < 2) throw InvalidArgument("scaler_fit: need at least 2 samples");

  const Eigen::VectorXd mean = training.colwise().mean().transpose();
  const Eigen::MatrixXd centered = training.rowwise() - mean.transpose();
  const Eigen::VectorXd sd =
      (centered.array().square().colwise().sum() / (n - 1))
          .sqrt()
          .transpose();

  FeatureScaler scaler;
  for (Eigen::Index f = 0; f < dim; ++f) {
    if (sd(f) > 0.0)
      scaler.kept.push_back(static_cast<int>(f));
    else
      scaler.dropped.push_back(static_cast<int>(f));
  }
  scaler.mean.resize(scaler.kept.size());
  scaler.stddev.resize(scaler.kept.size());
  for (std::size_t i = 0; i < scaler.kept.size(); ++i) {
    scaler.mean(i) = mean(scaler.kept[i]);
    scaler.stddev(i) = sd(scaler.kept[i]);
  }
  return scaler;
}

Eigen::VectorXd scaler_apply(const FeatureScaler& scaler,
                             const Eigen::VectorXd& v) {
  const Eigen::Index full =
      static_cast<Eigen::Index>(scaler.kept.size() + scaler.dropped.size());
  if (v.size() != full)
    throw InvalidArgument("scaler_apply: vector length does not match scaler");
  Eigen::VectorXd out(scaler.kept.size());
  for (std::size_t i = 0; i < scaler.kept.size(); ++i)
    out(i) = (v(scaler.kept[i]) - scaler.mean(i)) / scaler.stddev(i);
  return out;
}

namespace {

void write_reals(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v(i));
    out << buf;
  }
  out << '\n';
}

Eigen::VectorXd read_reals(std::istream& in, Eigen::Index n,
                           const char* what) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(in >> v(i)))
      throw DataError(std::string("model file: truncated ") + what);
  return v;
}

std::ifstream open_model(const std::string& path, const char* magic) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != magic || version != 1)
    throw DataError("model file: bad header (expected '" + std::string(magic) +
                    " 1'): " + path);
  return in;
}

}  // namespace

void save_pca(const PcaModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << "vq-pca 1\n";
  out << model.mean.size() << ' ' << model.eigenvalues.size() << ' '
      << model.n_components << ' ';
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", model.vr);
  out << buf << '\n';
  write_reals(out, model.mean);
  write_reals(out, model.eigenvalues);
  for (int i = 0; i < model.n_components; ++i)
    write_reals(out, model.eigenvectors.col(i));
}

PcaModel load_pca(const std::string& path) {
  std::ifstream in = open_model(path, "vq-pca");
  Eigen::Index dim = 0, n_eigen = 0;
  PcaModel model;
  if (!(in >> dim >> n_eigen >> model.n_components >> model.vr))
    throw DataError("model file: bad pca dimensions: " + path);
  model.mean = read_reals(in, dim, "pca mean");
  model.eigenvalues = read_reals(in, n_eigen, "pca eigenvalues");
  model.eigenvectors.resize(dim, model.n_components);
  for (int i = 0; i < model.n_components; ++i)
    model.eigenvectors.col(i) = read_reals(in, dim, "pca eigenvector");
  return model;
}

void save_sof(const SofSelection& sel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << "vq-sof 1\n";
  out << sel.scores.size() << ' ' << sel.chosen_indices.size() << '\n';
  for (std::size_t i = 0; i < sel.chosen_indices.size(); ++i)
    out << (i ? " " : "") << sel.chosen_indices[i];
  out << '\n';
  write_reals(out, sel.scores);
}

SofSelection load_sof(const std::string& path) {
  std::ifstream in = open_model(path, "vq-sof");
  Eigen::Index n_scores = 0;
  std::size_t n_chosen = 0;
  if (!(in >> n_scores >> n_chosen))
    throw DataError("model file: bad sof dimensions: " + path);
  SofSelection sel;
  sel.chosen_indices.resize(n_chosen);
  for (std::size_t i = 0; i < n_chosen; ++i)
    if (!(in >> sel.chosen_indices[i]))
      throw DataError("model file: truncated sof indices: " + path);
  sel.scores = read_reals(in, n_scores, "sof scores");
  return sel;
}

void save_scaler(const FeatureScaler& scaler, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << "vq-scaler 1\n";
  out << scaler.kept.size() + scaler.dropped.size() << ' '
      << scaler.kept.size() << '\n';
  for (std::size_t i = 0; i < scaler.kept.size(); ++i)
    out << (i ? " " : "") << scaler.kept[i];
  out << '\n';
  write_reals(out, scaler.mean);
  write_reals(out, scaler.stddev);
}

FeatureScaler load_scaler(const std::string& path) {
  std::ifstream in = open_model(path, "vq-scaler");
  Eigen::Index full = 0;
  std::size_t n_kept = 0;
  if (!(in >> full >> n_kept))
    throw DataError("model file: bad scaler dimensions: " + path);
  FeatureScaler scaler;
  scaler.kept.resize(n_kept);
  for (std::size_t i = 0; i < n_kept; ++i)
    if (!(in >> scaler.kept[i]))
      throw DataError("model file: truncated scaler indices: " + path);
  std::vector<bool> is_kept(full, false);
  for (int k : scaler.kept) is_kept[k] = true;
  for (Eigen::Index f = 0; f < full; ++f)
    if (!is_kept[f]) scaler.dropped.push_back(static_cast<int>(f));
  scaler.mean = read_reals(in, n_kept, "scaler mean");
  scaler.stddev = read_reals(in, n_kept, "scaler stddev");
  return scaler;
}

}  // namespace vq
