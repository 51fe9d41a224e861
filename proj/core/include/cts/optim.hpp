#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cts {

/// A named, flat view of one parameter tensor and its gradient.
template <class Scalar>
struct ParamBlock {
  std::string name;
  std::span<Scalar> values;
  std::span<const Scalar> grads;
};

struct AdamWHyper {
  double lr = 2e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Scalar>
struct AdamWState {
  AdamWHyper hyper;
  std::size_t step = 0;
  std::vector<std::vector<Scalar>> m;
  std::vector<std::vector<Scalar>> v;

  /// Zeroed moments shaped like `blocks`.
  static AdamWState for_blocks(const AdamWHyper& hyper,
                               std::span<const ParamBlock<Scalar>> blocks);
};

/// One bias-corrected AdamW update with decoupled weight decay:
///   theta <- theta - lr*wd*theta - lr * m_hat / (sqrt(v_hat) + eps),
/// where lr = hyper.lr * lr_multiplier. Throws NumericError naming the
/// first block with a non-finite gradient (nothing is updated then).
template <class Scalar>
void adamw_step(std::span<const ParamBlock<Scalar>> blocks, AdamWState<Scalar>& state,
                double lr_multiplier);

enum class ScheduleShape { cosine, constant };

/// Linear warmup from 0 to 1 over w = ceil(warmup_ratio * total_steps)
/// steps, then cosine decay to 0 at total_steps (or flat at 1).
class LrSchedule {
 public:
  LrSchedule(std::size_t total_steps, double warmup_ratio = 0.05,
             ScheduleShape shape = ScheduleShape::cosine);

  static LrSchedule with_warmup_steps(std::size_t total_steps, std::size_t warmup_steps,
                                      ScheduleShape shape = ScheduleShape::cosine);

  /// Multiplier in [0, 1]; step must be in [0, total_steps].
  double lr_at(std::size_t step) const;

  std::size_t total_steps() const noexcept { return total_; }
  std::size_t warmup_steps() const noexcept { return warmup_; }

 private:
  LrSchedule() = default;

  std::size_t total_ = 1;
  std::size_t warmup_ = 0;
  ScheduleShape shape_ = ScheduleShape::cosine;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<std::size_t> probed;
};

/// Central-difference check of `analytic` (the gradient of `loss` at
/// `params`) on `probe_count` random coordinates. Relative error per
/// coordinate is |a - f| / max(|f|, floor) with f the finite difference.
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& loss,
                           std::span<const double> params, std::span<const double> analytic,
                           std::size_t probe_count, double h, std::uint64_t seed,
                           double floor = 1e-7);

}  // namespace cts
