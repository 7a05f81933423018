#pragma once

#include <array>
#include <cstdint>

#include "vq/transform.hpp"

namespace vq {

struct ParamBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Real-coded GA over the 4 transform genes (scale, rotation, tx, ty):
// tournament selection, blend (BLX-alpha) crossover, Gaussian mutation,
// elitism. Defaults recover Table-scale misalignments on a 256x256 phantom.
struct GAConfig {
  int population = 60;
  int generations = 80;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  std::array<double, 4> mutation_sigma{0.05, 2.0, 2.0, 2.0};
  int elitism = 2;
  int tournament = 3;
  double blend_alpha = 0.5;
  std::array<ParamBounds, 4> bounds{
      ParamBounds{0.5, 1.5}, ParamBounds{-30.0, 30.0},
      ParamBounds{-50.0, 50.0}, ParamBounds{-50.0, 50.0}};
  std::uint64_t seed = 0;
};

void check_ga_config(const GAConfig& cfg);

struct AlignResult {
  TransformParams transform;
  double fitness = 0.0;
};

// Maximizes overlap_fitness(reference, target, t) over the bounded search
// box. Best-so-far fitness is nondecreasing across generations and the whole
// run is reproducible from cfg.seed.
AlignResult ga_align(const GrayImage& reference, const GrayImage& target,
                     const GAConfig& cfg);

}  // namespace vq
