#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqcrf/autodiff.hpp"

namespace seqcrf {

struct OptimizerSettings {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double epsilon = 1e-8;
};

// Adagrad with momentum on the preconditioned step:
//   G += g^2;  p = g / (sqrt(G) + eps);  v = mu v + p;  theta -= lr v
template <typename S>
struct OptimizerState {
  OptimizerSettings settings;
  std::vector<std::vector<S>> accumulator;  // G, one buffer per parameter
  std::vector<std::vector<S>> velocity;     // v
  std::size_t steps = 0;
  std::size_t skipped = 0;
  std::vector<std::string> incidents;

  OptimizerState() = default;
  OptimizerState(std::span<Parameter<S>* const> params, OptimizerSettings settings);
};

struct StepOutcome {
  bool applied = false;
  double grad_norm = 0.0;
};

// Skips the whole step, leaving parameters and state untouched, when any
// gradient entry is not finite; the incident is recorded in the state.
template <typename S>
StepOutcome adagrad_momentum_step(std::span<Parameter<S>* const> params, OptimizerState<S>& state);

// Global L2 norm of all gradients.
template <typename S>
double gradient_norm(std::span<Parameter<S>* const> params);

// Rescales gradients so their global norm is at most max_norm. Returns the
// norm before clipping. No-op for max_norm <= 0 or non-finite norms.
template <typename S>
double clip_gradients(std::span<Parameter<S>* const> params, double max_norm);

}  // namespace seqcrf
