#include "cts/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cts/error.hpp"
#include "cts/rng.hpp"

namespace cts {

template <class Scalar>
AdamWState<Scalar> AdamWState<Scalar>::for_blocks(const AdamWHyper& hyper,
                                                  std::span<const ParamBlock<Scalar>> blocks) {
  AdamWState state;
  state.hyper = hyper;
  for (const auto& b : blocks) {
    state.m.emplace_back(b.values.size(), Scalar(0));
    state.v.emplace_back(b.values.size(), Scalar(0));
  }
  return state;
}

template <class Scalar>
void adamw_step(std::span<const ParamBlock<Scalar>> blocks, AdamWState<Scalar>& state,
                double lr_multiplier) {
  if (blocks.size() != state.m.size()) throw ArgumentError("adamw: block count mismatch");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (blk.values.size() != state.m[b].size() || blk.grads.size() != blk.values.size())
      throw ArgumentError("adamw: shape mismatch in block '" + blk.name + "'");
    if (!std::all_of(blk.grads.begin(), blk.grads.end(),
                     [](Scalar g) { return std::isfinite(g); }))
      throw NumericError("adamw: non-finite gradient in block '" + blk.name + "'",
                         static_cast<long long>(state.step));
  }

  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double lr = h.lr * lr_multiplier;
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  const auto b1 = static_cast<Scalar>(h.beta1);
  const auto b2 = static_cast<Scalar>(h.beta2);
  const auto decay = static_cast<Scalar>(1.0 - lr * h.weight_decay);
  const auto step_size = static_cast<Scalar>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<Scalar>(h.eps);

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto values = blocks[b].values;
    const auto grads = blocks[b].grads;
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Scalar g = grads[i];
      m[i] = b1 * m[i] + (Scalar(1) - b1) * g;
      v[i] = b2 * v[i] + (Scalar(1) - b2) * g * g;
      values[i] *= decay;
      values[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

template struct AdamWState<float>;
template struct AdamWState<double>;
template void adamw_step<float>(std::span<const ParamBlock<float>>, AdamWState<float>&, double);
template void adamw_step<double>(std::span<const ParamBlock<double>>, AdamWState<double>&,
                                 double);

LrSchedule::LrSchedule(std::size_t total_steps, double warmup_ratio, ScheduleShape shape)
    : total_(total_steps), shape_(shape) {
  if (total_steps < 1) throw ArgumentError("lr schedule: total_steps must be >= 1");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0))
    throw ArgumentError("lr schedule: warmup_ratio must be in [0, 1)");
  // The small slack keeps e.g. 0.05 * 100 from rounding up to 6.
  warmup_ = static_cast<std::size_t>(
      std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9));
  warmup_ = std::min(warmup_, total_);
}

LrSchedule LrSchedule::with_warmup_steps(std::size_t total_steps, std::size_t warmup_steps,
                                         ScheduleShape shape) {
  if (total_steps < 1) throw ArgumentError("lr schedule: total_steps must be >= 1");
  if (warmup_steps > total_steps)
    throw ArgumentError("lr schedule: warmup exceeds total steps");
  LrSchedule s;
  s.total_ = total_steps;
  s.warmup_ = warmup_steps;
  s.shape_ = shape;
  return s;
}

double LrSchedule::lr_at(std::size_t step) const {
  if (step > total_)
    throw ArgumentError("lr schedule: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(total_) + "]");
  if (step < warmup_) return static_cast<double>(step) / static_cast<double>(warmup_);
  if (shape_ == ScheduleShape::constant || total_ == warmup_) return 1.0;
  const double progress =
      static_cast<double>(step - warmup_) / static_cast<double>(total_ - warmup_);
  return std::max(0.0, 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& loss,
                           std::span<const double> params, std::span<const double> analytic,
                           std::size_t probe_count, double h, std::uint64_t seed,
                           double floor) {
  if (params.size() != analytic.size())
    throw ArgumentError("grad_check: gradient/parameter size mismatch");
  if (params.empty() || probe_count == 0) throw ArgumentError("grad_check: nothing to probe");
  if (!(h > 0.0)) throw ArgumentError("grad_check: h must be positive");

  Rng rng(seed);
  GradCheckResult result;
  if (probe_count <= params.size()) {
    result.probed = rng.sample_without_replacement(params.size(), probe_count);
  } else {
    for (std::size_t i = 0; i < probe_count; ++i)
      result.probed.push_back(static_cast<std::size_t>(rng.uniform_index(params.size())));
  }

  std::vector<double> theta(params.begin(), params.end());
  auto eval = [&] {
    const double v = loss(theta);
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
    return v;
  };
  for (const auto idx : result.probed) {
    const double saved = theta[idx];
    theta[idx] = saved + h;
    const double up = eval();
    theta[idx] = saved - h;
    const double down = eval();
    theta[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[idx] - numeric) / std::max(std::abs(numeric), floor);
    if (rel >= result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = idx;
    }
  }
  return result;
}

}  // namespace cts
