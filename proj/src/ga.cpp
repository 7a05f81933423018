#include "vq/ga.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vq/error.hpp"
#include "vq/rng.hpp"

namespace vq {

void check_ga_config(const GAConfig& cfg) {
  if (cfg.population < 2) throw InvalidArgument("ga: population must be >= 2");
  if (cfg.generations < 1) throw InvalidArgument("ga: generations must be >= 1");
  if (cfg.crossover_rate < 0.0 || cfg.crossover_rate > 1.0 ||
      cfg.mutation_rate < 0.0 || cfg.mutation_rate > 1.0)
    throw InvalidArgument("ga: rates must be in [0, 1]");
  if (cfg.elitism < 0 || cfg.elitism >= cfg.population)
    throw InvalidArgument("ga: elitism must be < population");
  if (cfg.tournament < 1) throw InvalidArgument("ga: tournament must be >= 1");
  const double identity[4] = {1.0, 0.0, 0.0, 0.0};
  for (int g = 0; g < 4; ++g) {
    if (!(cfg.bounds[g].lo < cfg.bounds[g].hi))
      throw InvalidArgument("ga: bounds must be nonempty intervals");
    if (identity[g] < cfg.bounds[g].lo || identity[g] > cfg.bounds[g].hi)
      throw InvalidArgument("ga: bounds must contain the identity transform");
  }
}

namespace {

using Genes = std::array<double, 4>;

TransformParams to_transform(const Genes& g) {
  return TransformParams{g[0], g[1], g[2], g[3]};
}

double clamp_gene(double v, const ParamBounds& b) {
  return std::clamp(v, b.lo, b.hi);
}

}  // namespace

AlignResult ga_align(const GrayImage& reference, const GrayImage& target,
                     const GAConfig& cfg) {
  check_ga_config(cfg);
  Rng rng(cfg.seed);

  auto fitness_of = [&](const Genes& g) {
    return overlap_fitness(reference, target, to_transform(g));
  };

  const int pop_n = cfg.population;
  std::vector<Genes> pop(pop_n);
  std::vector<double> fit(pop_n);
  for (int i = 0; i < pop_n; ++i) {
    for (int g = 0; g < 4; ++g)
      pop[i][g] = rng.uniform(cfg.bounds[g].lo, cfg.bounds[g].hi);
    fit[i] = fitness_of(pop[i]);
  }

  auto best_index = [&]() {
    return static_cast<int>(std::max_element(fit.begin(), fit.end()) -
                            fit.begin());
  };
  Genes best = pop[best_index()];
  double best_fit = fit[best_index()];

  auto tournament = [&]() -> const Genes& {
    int winner = static_cast<int>(rng.below(pop_n));
    for (int k = 1; k < cfg.tournament; ++k) {
      const int rival = static_cast<int>(rng.below(pop_n));
      if (fit[rival] > fit[winner]) winner = rival;
    }
    return pop[winner];
  };

  std::vector<int> order(pop_n);
  for (int gen = 0; gen < cfg.generations; ++gen) {
    for (int i = 0; i < pop_n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fit[a] > fit[b]; });

    std::vector<Genes> next;
    next.reserve(pop_n);
    for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[e]]);

    while (static_cast<int>(next.size()) < pop_n) {
      const Genes pa = tournament();
      const Genes pb = tournament();
      Genes child_a = pa, child_b = pb;
      if (rng.uniform() < cfg.crossover_rate) {
        for (int g = 0; g < 4; ++g) {
          const double lo = std::min(pa[g], pb[g]);
          const double hi = std::max(pa[g], pb[g]);
          const double span = hi - lo;
          const double a = lo - cfg.blend_alpha * span;
          const double b = hi + cfg.blend_alpha * span;
          child_a[g] = clamp_gene(rng.uniform(a, b), cfg.bounds[g]);
          child_b[g] = clamp_gene(rng.uniform(a, b), cfg.bounds[g]);
        }
      }
      for (Genes* child : {&child_a, &child_b}) {
        for (int g = 0; g < 4; ++g)
          if (rng.uniform() < cfg.mutation_rate)
            (*child)[g] = clamp_gene(
                (*child)[g] + rng.normal(0.0, cfg.mutation_sigma[g]),
                cfg.bounds[g]);
        if (static_cast<int>(next.size()) < pop_n) next.push_back(*child);
      }
    }

    pop = std::move(next);
    for (int i = 0; i < pop_n; ++i) fit[i] = fitness_of(pop[i]);
    const int bi = best_index();
    if (fit[bi] > best_fit) {
      best_fit = fit[bi];
      best = pop[bi];
    }
  }

  return AlignResult{normalized(to_transform(best)), best_fit};
}

}  // namespace vq
