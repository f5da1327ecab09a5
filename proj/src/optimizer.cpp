#include "seqcrf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace seqcrf {

template <typename S>
OptimizerState<S>::OptimizerState(std::span<Parameter<S>* const> params, OptimizerSettings s) : settings(s) {
  if (s.learning_rate <= 0 || s.momentum < 0 || s.momentum >= 1 || s.epsilon <= 0) {
    throw std::invalid_argument("optimizer needs learning rate > 0, momentum in [0, 1) and epsilon > 0");
  }
  for (auto* p : params) {
    accumulator.emplace_back(p->value.size(), S(0));
    velocity.emplace_back(p->value.size(), S(0));
  }
}

template <typename S>
double gradient_norm(std::span<Parameter<S>* const> params) {
  double sq = 0;
  for (auto* p : params)
    for (S g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(sq);
}

template <typename S>
double clip_gradients(std::span<Parameter<S>* const> params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm <= 0 || !std::isfinite(norm) || norm <= max_norm) return norm;
  const S factor = static_cast<S>(max_norm / norm);
  for (auto* p : params)
    for (S& g : p->grad) g *= factor;
  return norm;
}

template <typename S>
StepOutcome adagrad_momentum_step(std::span<Parameter<S>* const> params, OptimizerState<S>& state) {
  if (params.size() != state.accumulator.size()) {
    throw std::invalid_argument("optimizer state tracks " + std::to_string(state.accumulator.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  StepOutcome out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    if (p->grad.size() != p->value.size() || state.accumulator[i].size() != p->value.size()) {
      throw std::invalid_argument("optimizer: shape of '" + p->name + "' disagrees with its state");
    }
    for (std::size_t k = 0; k < p->grad.size(); ++k) {
      if (!std::isfinite(p->grad[k])) {
        ++state.skipped;
        state.incidents.push_back("step " + std::to_string(state.steps + state.skipped) +
                                  ": non-finite gradient in '" + p->name + "' at index " + std::to_string(k));
        out.grad_norm = std::nan("");
        return out;
      }
    }
  }
  out.grad_norm = gradient_norm(params);
  const S lr = static_cast<S>(state.settings.learning_rate);
  const S mu = static_cast<S>(state.settings.momentum);
  const S eps = static_cast<S>(state.settings.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    auto& acc = state.accumulator[i];
    auto& vel = state.velocity[i];
    for (std::size_t k = 0; k < p->grad.size(); ++k) {
      const S g = p->grad[k];
      acc[k] += g * g;
      vel[k] = mu * vel[k] + g / (std::sqrt(acc[k]) + eps);
      p->value.data[k] -= lr * vel[k];
    }
  }
  ++state.steps;
  out.applied = true;
  return out;
}

#define SEQCRF_INSTANTIATE_OPT(S)                                                                  \
  template struct OptimizerState<S>;                                                               \
  template StepOutcome adagrad_momentum_step<S>(std::span<Parameter<S>* const>, OptimizerState<S>&); \
  template double gradient_norm<S>(std::span<Parameter<S>* const>);                                \
  template double clip_gradients<S>(std::span<Parameter<S>* const>, double);

SEQCRF_INSTANTIATE_OPT(float)
SEQCRF_INSTANTIATE_OPT(double)

#undef SEQCRF_INSTANTIATE_OPT

}  // namespace seqcrf
