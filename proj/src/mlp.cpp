#include "vq/mlp.hpp"

#include <cmath>

#include "vq/error.hpp"

namespace vq {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Read-only views into the flat parameter vector, in layout order.
struct ParamView {
  Eigen::Map<const RowMajorMatrix> w1;  // n_hidden x n_in
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::VectorXd> w2;
  double b2;
};

ParamView view(const MlpShape& shape, const Eigen::VectorXd& params) {
  const int nh = shape.n_hidden, ni = shape.n_in;
  const double* d = params.data();
  return ParamView{Eigen::Map<const RowMajorMatrix>(d, nh, ni),
                   Eigen::Map<const Eigen::VectorXd>(d + nh * ni, nh),
                   Eigen::Map<const Eigen::VectorXd>(d + nh * ni + nh, nh),
                   d[nh * ni + 2 * nh]};
}

void check_shape(const MlpShape& shape, const Eigen::VectorXd& params) {
  if (shape.n_in < 1) throw InvalidArgument("mlp: n_in must be >= 1");
  if (shape.n_hidden < 1) throw InvalidArgument("mlp: n_hidden must be >= 1");
  if (params.size() != mlp_param_count(shape))
    throw InvalidArgument("mlp: parameter vector length mismatch");
}

}  // namespace

int mlp_param_count(const MlpShape& shape) {
  return shape.n_hidden * (shape.n_in + 1) + shape.n_hidden + 1;
}

void check_mlp(const MlpShape& shape, const Eigen::VectorXd& params) {
  check_shape(shape, params);
  if (!params.allFinite()) throw InvalidArgument("mlp: non-finite weight");
}

double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double mlp_forward(const MlpShape& shape, const Eigen::VectorXd& params,
                   const Eigen::VectorXd& x) {
  check_shape(shape, params);
  if (x.size() != shape.n_in)
    throw InvalidArgument("mlp_forward: input length mismatch");
  const ParamView p = view(shape, params);
  const Eigen::VectorXd h = (p.w1 * x + p.b1).array().tanh();
  return logistic(p.w2.dot(h) + p.b2);
}

Eigen::VectorXd mlp_forward_batch(const MlpShape& shape,
                                  const Eigen::VectorXd& params,
                                  const Eigen::MatrixXd& inputs) {
  check_shape(shape, params);
  if (inputs.cols() != shape.n_in)
    throw InvalidArgument("mlp_forward_batch: input width mismatch");
  const ParamView p = view(shape, params);
  const Eigen::MatrixXd hidden =
      ((inputs * p.w1.transpose()).rowwise() + p.b1.transpose())
          .array()
          .tanh();
  Eigen::VectorXd activation = hidden * p.w2;
  activation.array() += p.b2;
  Eigen::VectorXd out(activation.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = logistic(activation(i));
  return out;
}

double mlp_log_posterior(const MlpShape& shape, const Eigen::VectorXd& params,
                         const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, double alpha,
                         double beta) {
  if (inputs.rows() != targets.size())
    throw InvalidArgument("mlp_log_posterior: target count mismatch");
  const Eigen::VectorXd y = mlp_forward_batch(shape, params, inputs);
  const double data_term = 0.5 * (y - targets).squaredNorm();
  return -beta * data_term - 0.5 * alpha * params.squaredNorm();
}

Eigen::VectorXd mlp_grad_log_posterior(const MlpShape& shape,
                                       const Eigen::VectorXd& params,
                                       const Eigen::MatrixXd& inputs,
                                       const Eigen::VectorXd& targets,
                                       double alpha, double beta) {
  check_shape(shape, params);
  if (inputs.cols() != shape.n_in)
    throw InvalidArgument("mlp_grad_log_posterior: input width mismatch");
  if (inputs.rows() != targets.size())
    throw InvalidArgument("mlp_grad_log_posterior: target count mismatch");

  const int nh = shape.n_hidden, ni = shape.n_in;
  const ParamView p = view(shape, params);

  // Forward pass, keeping the intermediates needed for backprop.
  const Eigen::MatrixXd hidden =
      ((inputs * p.w1.transpose()).rowwise() + p.b1.transpose())
          .array()
          .tanh();
  Eigen::VectorXd activation = hidden * p.w2;
  activation.array() += p.b2;
  Eigen::VectorXd y(activation.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = logistic(activation(i));

  // Squared-error data term through the logistic output:
  // dE/da_i = (y_i - t_i) * y_i * (1 - y_i).
  const Eigen::ArrayXd ya = y.array();
  const Eigen::VectorXd de_da =
      ((ya - targets.array()) * ya * (1.0 - ya)).matrix();

  const Eigen::VectorXd de_w2 = hidden.transpose() * de_da;
  const double de_b2 = de_da.sum();
  const Eigen::MatrixXd de_hidden = de_da * p.w2.transpose();
  const Eigen::MatrixXd de_z =
      (de_hidden.array() * (1.0 - hidden.array().square())).matrix();
  const Eigen::MatrixXd de_w1 = de_z.transpose() * inputs;  // n_hidden x n_in
  const Eigen::VectorXd de_b1 = de_z.colwise().sum().transpose();

  // Gradient of the log posterior: -beta * dE/dw - alpha * w.
  Eigen::VectorXd grad(params.size());
  Eigen::Map<RowMajorMatrix>(grad.data(), nh, ni) = -beta * de_w1;
  grad.segment(nh * ni, nh) = -beta * de_b1;
  grad.segment(nh * ni + nh, nh) = -beta * de_w2;
  grad(nh * ni + 2 * nh) = -beta * de_b2;
  grad -= alpha * params;
  return grad;
}

Eigen::VectorXd mlp_init(const MlpShape& shape, Rng& rng, double sigma) {
  if (shape.n_in < 1 || shape.n_hidden < 1)
    throw InvalidArgument("mlp_init: bad shape");
  if (!(sigma >= 0.0)) throw InvalidArgument("mlp_init: sigma must be >= 0");
  Eigen::VectorXd params(mlp_param_count(shape));
  for (Eigen::Index i = 0; i < params.size(); ++i)
    params(i) = rng.normal(0.0, sigma);
  return params;
}

}  // namespace vq
