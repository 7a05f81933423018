#pragma once

// Hamiltonian (hybrid) Monte Carlo over network weights, and the committee
// built from the retained posterior samples.  The generic driver works on
// any differentiable log density; hmc_sample wires it to the network
// posterior defined in mlp.hpp.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vq/mlp.hpp"
#include "vq/phantom.hpp"
#include "vq/rng.hpp"

namespace vq {

struct HmcConfig {
  double step_size = 0.08;  // leapfrog step
  int n_leapfrog = 50;      // steps per trajectory
  int n_burnin = 500;       // discarded leading proposals
  int n_committee = 250;    // retained samples
  int thin = 4;             // keep every thin-th post-burn-in proposal
  double prior_alpha = 0.01;
  double noise_beta = 10.0;
  std::uint64_t seed = 0;
};

void check_hmc_config(const HmcConfig& cfg);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;
using LogDensityGrad = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// One leapfrog trajectory in place: half momentum step, alternating full
// position/momentum steps, closing half momentum step.  Volume preserving
// and time reversible (negate the momentum to retrace the path).
void leapfrog(const LogDensityGrad& grad, Eigen::VectorXd& position,
              Eigen::VectorXd& momentum, double step, int n_steps);

struct HmcRun {
  std::vector<Eigen::VectorXd> samples;
  double acceptance_rate = 0.0;
};

// Generic sampler: momentum drawn from a unit Gaussian, one leapfrog
// trajectory per proposal, Metropolis acceptance min(1, exp(H0 - H1)).
// A non-finite Hamiltonian rejects the proposal; more than 95 rejections
// over 100 consecutive proposals aborts with a step-size diagnostic.
HmcRun hmc_run(const LogDensity& logp, const LogDensityGrad& grad,
               const Eigen::VectorXd& init, const HmcConfig& cfg, Rng& rng);

struct Committee {
  MlpShape shape;
  std::vector<Eigen::VectorXd> members;
  double acceptance_rate = 0.0;  // of the chain that produced the members
};

// Samples n_committee networks from the posterior over weights given the
// scaled inputs (rows) and ordinal targets in [0,1].
Committee hmc_sample(const MlpShape& shape, const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& targets, const HmcConfig& cfg);

struct CommitteeOutput {
  double mean = 0.0;
  double std = 0.0;    // sample standard deviation over members
  double ci_lo = 0.0;  // mean - 1.96 std
  double ci_hi = 0.0;  // mean + 1.96 std
  CaseLabel predicted = CaseLabel::Negative;
};

// Class from the committee-mean output: < 0.25 negative, < 0.75
// intermediate, otherwise high.
CaseLabel classify_mean(double mean);

// Ordinal training target for a label: 0.0 / 0.5 / 1.0.
double label_target(CaseLabel label);

CommitteeOutput committee_predict(const Committee& committee,
                                  const Eigen::VectorXd& x);

// Versioned text format: header line, count line (n_in n_hidden n_out
// n_members), then one whitespace-separated weight line per member.
void save_committee(const std::string& path, const Committee& committee);
Committee load_committee(const std::string& path);

}  // namespace vq
