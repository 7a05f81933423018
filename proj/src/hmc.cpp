#include "vq/hmc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vq/error.hpp"

namespace vq {

void check_hmc_config(const HmcConfig& cfg) {
  if (!(cfg.step_size > 0.0))
    throw InvalidArgument("hmc: step_size must be > 0");
  if (cfg.n_leapfrog < 1) throw InvalidArgument("hmc: n_leapfrog must be >= 1");
  if (cfg.n_burnin < 0) throw InvalidArgument("hmc: n_burnin must be >= 0");
  if (cfg.n_committee < 1)
    throw InvalidArgument("hmc: n_committee must be >= 1");
  if (cfg.thin < 1) throw InvalidArgument("hmc: thin must be >= 1");
  if (!(cfg.prior_alpha > 0.0))
    throw InvalidArgument("hmc: prior_alpha must be > 0");
  if (!(cfg.noise_beta > 0.0))
    throw InvalidArgument("hmc: noise_beta must be > 0");
}

void leapfrog(const LogDensityGrad& grad, Eigen::VectorXd& position,
              Eigen::VectorXd& momentum, double step, int n_steps) {
  if (n_steps < 1) throw InvalidArgument("leapfrog: n_steps must be >= 1");
  momentum += 0.5 * step * grad(position);
  for (int s = 0; s < n_steps; ++s) {
    position += step * momentum;
    if (s + 1 < n_steps) momentum += step * grad(position);
  }
  momentum += 0.5 * step * grad(position);
}

HmcRun hmc_run(const LogDensity& logp, const LogDensityGrad& grad,
               const Eigen::VectorXd& init, const HmcConfig& cfg, Rng& rng) {
  // Only the chain-shape fields matter here; alpha/beta belong to the
  // density the caller supplies.
  if (!(cfg.step_size > 0.0))
    throw InvalidArgument("hmc: step_size must be > 0");
  if (cfg.n_leapfrog < 1) throw InvalidArgument("hmc: n_leapfrog must be >= 1");
  if (cfg.n_burnin < 0) throw InvalidArgument("hmc: n_burnin must be >= 0");
  if (cfg.n_committee < 1)
    throw InvalidArgument("hmc: n_committee must be >= 1");
  if (cfg.thin < 1) throw InvalidArgument("hmc: thin must be >= 1");

  Eigen::VectorXd q = init;
  double lp = logp(q);
  if (!std::isfinite(lp))
    throw NumericError("hmc: log density is not finite at the start point");

  const long total =
      static_cast<long>(cfg.n_burnin) +
      static_cast<long>(cfg.thin) * static_cast<long>(cfg.n_committee);
  HmcRun run;
  run.samples.reserve(cfg.n_committee);

  long accepted = 0;
  // Sliding count of rejections over the last 100 proposals.
  std::vector<char> recent(100, 0);
  int recent_rejects = 0;
  long post = 0;

  for (long it = 0; it < total; ++it) {
    Eigen::VectorXd p(q.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.normal();

    const double h0 = -lp + 0.5 * p.squaredNorm();
    Eigen::VectorXd q1 = q;
    Eigen::VectorXd p1 = p;
    leapfrog(grad, q1, p1, cfg.step_size, cfg.n_leapfrog);
    const double lp1 = logp(q1);
    const double h1 = -lp1 + 0.5 * p1.squaredNorm();

    const double u = rng.uniform();
    const bool accept = std::isfinite(h1) && u < std::exp(h0 - h1);
    if (accept) {
      q = std::move(q1);
      lp = lp1;
      ++accepted;
    }

    const int slot = static_cast<int>(it % 100);
    recent_rejects += (accept ? 0 : 1) - recent[slot];
    recent[slot] = accept ? 0 : 1;
    if (it >= 99 && recent_rejects > 95) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "hmc: %d of the last 100 proposals rejected; "
                    "step_size %.6g is too large for this target",
                    recent_rejects, cfg.step_size);
      throw NumericError(msg);
    }

    if (it >= cfg.n_burnin) {
      ++post;
      if (post % cfg.thin == 0) run.samples.push_back(q);
    }
  }

  run.acceptance_rate = static_cast<double>(accepted) / total;
  return run;
}

Committee hmc_sample(const MlpShape& shape, const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& targets, const HmcConfig& cfg) {
  check_hmc_config(cfg);
  if (inputs.rows() == 0) throw InvalidArgument("hmc_sample: empty dataset");
  if (inputs.rows() != targets.size())
    throw InvalidArgument("hmc_sample: target count mismatch");
  if (inputs.cols() != shape.n_in)
    throw InvalidArgument("hmc_sample: input width mismatch");
  for (Eigen::Index i = 0; i < targets.size(); ++i)
    if (!(targets(i) >= 0.0 && targets(i) <= 1.0))
      throw InvalidArgument("hmc_sample: targets must lie in [0, 1]");

  Rng rng(derive_seed(cfg.seed, "hmc"));
  const Eigen::VectorXd init = mlp_init(shape, rng, 0.1);
  const auto logp = [&](const Eigen::VectorXd& w) {
    return mlp_log_posterior(shape, w, inputs, targets, cfg.prior_alpha,
                             cfg.noise_beta);
  };
  const auto grad = [&](const Eigen::VectorXd& w) {
    return mlp_grad_log_posterior(shape, w, inputs, targets, cfg.prior_alpha,
                                  cfg.noise_beta);
  };

  HmcRun run = hmc_run(logp, grad, init, cfg, rng);
  Committee committee;
  committee.shape = shape;
  committee.members = std::move(run.samples);
  committee.acceptance_rate = run.acceptance_rate;
  return committee;
}

CaseLabel classify_mean(double mean) {
  if (mean < 0.25) return CaseLabel::Negative;
  if (mean < 0.75) return CaseLabel::Intermediate;
  return CaseLabel::High;
}

double label_target(CaseLabel label) {
  switch (label) {
    case CaseLabel::Negative: return 0.0;
    case CaseLabel::Intermediate: return 0.5;
    case CaseLabel::High: return 1.0;
  }
  throw InvalidArgument("label_target: bad label");
}

CommitteeOutput committee_predict(const Committee& committee,
                                  const Eigen::VectorXd& x) {
  if (committee.members.empty())
    throw InvalidArgument("committee_predict: empty committee");
  const Eigen::Index n = static_cast<Eigen::Index>(committee.members.size());
  Eigen::VectorXd outs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    outs(i) = mlp_forward(committee.shape, committee.members[i], x);

  CommitteeOutput out;
  out.mean = outs.mean();
  out.std = n > 1 ? std::sqrt((outs.array() - out.mean).square().sum() /
                              static_cast<double>(n - 1))
                  : 0.0;
  out.ci_lo = out.mean - 1.96 * out.std;
  out.ci_hi = out.mean + 1.96 * out.std;
  out.predicted = classify_mean(out.mean);
  return out;
}

void save_committee(const std::string& path, const Committee& committee) {
  if (committee.members.empty())
    throw InvalidArgument("save_committee: empty committee");
  const int n_params = mlp_param_count(committee.shape);
  for (const Eigen::VectorXd& m : committee.members)
    if (m.size() != n_params)
      throw InvalidArgument("save_committee: member size mismatch");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_committee: cannot open " + path);
  out << "vq-committee 1\n";
  out << committee.shape.n_in << ' ' << committee.shape.n_hidden << " 1 "
      << committee.members.size() << '\n';
  char buf[32];
  for (const Eigen::VectorXd& m : committee.members) {
    for (int i = 0; i < n_params; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i));
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("save_committee: write failed for " + path);
}

Committee load_committee(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_committee: cannot open " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "vq-committee" || version != 1)
    throw DataError("load_committee: bad header in " + path);

  Committee committee;
  int n_out = 0;
  std::size_t n_members = 0;
  if (!(in >> committee.shape.n_in >> committee.shape.n_hidden >> n_out >>
        n_members))
    throw DataError("load_committee: bad count line in " + path);
  if (committee.shape.n_in < 1 || committee.shape.n_hidden < 1 || n_out != 1 ||
      n_members == 0)
    throw DataError("load_committee: invalid dimensions in " + path);

  const int n_params = mlp_param_count(committee.shape);
  committee.members.resize(n_members);
  for (std::size_t m = 0; m < n_members; ++m) {
    Eigen::VectorXd w(n_params);
    for (int i = 0; i < n_params; ++i)
      if (!(in >> w(i)))
        throw DataError("load_committee: truncated member weights in " + path);
    check_mlp(committee.shape, w);
    committee.members[m] = std::move(w);
  }
  return committee;
}

}  // namespace vq
