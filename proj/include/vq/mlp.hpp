#pragma once

// One-hidden-layer network used by the committee classifier: n_in inputs,
// n_hidden tanh units, a single logistic output in (0,1).  Parameters are
// kept as one flat vector so a Hamiltonian sampler can treat the whole
// network as a point in R^P.

#include <Eigen/Dense>

#include "vq/rng.hpp"

namespace vq {

struct MlpShape {
  int n_in = 0;
  int n_hidden = 5;
};

// Flat layout: first-layer weights (row-major n_hidden x n_in), first-layer
// biases, output weights, output bias.
int mlp_param_count(const MlpShape& shape);

// Validates shape/parameter consistency and finiteness.
void check_mlp(const MlpShape& shape, const Eigen::VectorXd& params);

// Overflow-safe logistic sigmoid.
double logistic(double a);

double mlp_forward(const MlpShape& shape, const Eigen::VectorXd& params,
                   const Eigen::VectorXd& x);

// Forward pass over many inputs at once; inputs are the rows of `inputs`.
Eigen::VectorXd mlp_forward_batch(const MlpShape& shape,
                                  const Eigen::VectorXd& params,
                                  const Eigen::MatrixXd& inputs);

// Unnormalized log posterior of the weights given (inputs, targets):
//   -beta * sum_i 1/2 (y_i - t_i)^2  -  alpha * 1/2 |w|^2
// Non-finite weights are not rejected here; the sampler treats a non-finite
// result as an automatic rejection.
double mlp_log_posterior(const MlpShape& shape, const Eigen::VectorXd& params,
                         const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, double alpha,
                         double beta);

// Exact gradient of mlp_log_posterior via backpropagation.
Eigen::VectorXd mlp_grad_log_posterior(const MlpShape& shape,
                                       const Eigen::VectorXd& params,
                                       const Eigen::MatrixXd& inputs,
                                       const Eigen::VectorXd& targets,
                                       double alpha, double beta);

// Independent N(0, sigma^2) draw for every parameter; chain starting point.
Eigen::VectorXd mlp_init(const MlpShape& shape, Rng& rng, double sigma = 0.1);

}  // namespace vq
