#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cts/embedding.hpp"
#include "cts/optim.hpp"
#include "cts/pairgen.hpp"

namespace cts {

/// Rows whose transformed L2 norm falls below this are treated as zero.
inline constexpr double kZeroNormGuard = 1e-12;

/// Trainable specialization head over frozen base embeddings:
///   z = normalize(x + tanh(x W + b))   (residual, default)
///   z = normalize(tanh(x W + b))       (non-residual)
/// W and b start at zero, so a fresh residual head is normalize(x).
template <class Scalar>
class SpecializationHead {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  SpecializationHead() = default;
  explicit SpecializationHead(std::size_t dim, bool residual = true);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weight_.rows()); }
  bool residual() const noexcept { return residual_; }

  Matrix& weight() noexcept { return weight_; }
  const Matrix& weight() const noexcept { return weight_; }
  Vector& bias() noexcept { return bias_; }
  const Vector& bias() const noexcept { return bias_; }

  /// Row-wise transform with unit-norm output; rows under the zero-norm
  /// guard come back as zero rows. Throws ArgumentError on width mismatch.
  Matrix encode(const Matrix& x) const;

  template <class Other>
  SpecializationHead<Other> cast() const {
    SpecializationHead<Other> out(dim(), residual_);
    out.weight() = weight_.template cast<Other>();
    out.bias() = bias_.template cast<Other>();
    return out;
  }

  friend bool operator==(const SpecializationHead& a, const SpecializationHead& b) {
    return a.residual_ == b.residual_ && a.weight_.rows() == b.weight_.rows() &&
           a.weight_ == b.weight_ && a.bias_ == b.bias_;
  }

 private:
  Matrix weight_;
  Vector bias_;
  bool residual_ = true;
};

using HeadF = SpecializationHead<float>;
using HeadD = SpecializationHead<double>;

/// Encode every row; ids and order are preserved.
EmbeddingMatrix head_encode(const HeadF& head, const EmbeddingMatrix& x);

struct PairDistances {
  std::vector<double> positive;
  std::vector<double> negative;
};

/// Cosine distance d(u, v) = 1 - u.v on unit-norm rows, clamped to [0, 2].
template <class Scalar>
PairDistances pair_distances(const RowMatrix<Scalar>& z, std::span<const SentencePair> pairs);

struct HardSelection {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
  bool positive_fallback = false;
  bool negative_fallback = false;
};

/// Online-contrastive mining: negatives closer than the farthest positive,
/// positives farther than the closest negative. An empty selection falls
/// back to every pair of that polarity. Both inputs must be non-empty.
HardSelection ocl_select_hard(std::span<const double> pos_d, std::span<const double> neg_d);

/// Mean over the given (already selected) pairs of 0.5*d^2 for positives and
/// 0.5*max(0, margin - d)^2 for negatives. Zero when both are empty.
double contrastive_loss(std::span<const double> pos_d, std::span<const double> neg_d,
                        double margin);

template <class Scalar>
struct HeadGradient {
  RowMatrix<Scalar> weight;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> bias;
};

/// Online contrastive loss of `head` on `pairs` (indices into rows of `x`),
/// with hard selection done on the current distances. Fills `grad` when
/// non-null. Pairs touching zero-guarded rows are ignored.
template <class Scalar>
double ocl_objective(const SpecializationHead<Scalar>& head, const RowMatrix<Scalar>& x,
                     std::span<const SentencePair> pairs, double margin,
                     HeadGradient<Scalar>* grad);

struct CtsConfig {
  double margin = 0.5;
  std::size_t epochs = 3;
  std::size_t batch_pairs = 64;
  double lr = 2e-5;
  double weight_decay = 0.01;
  double warmup_ratio = 0.05;
  std::uint64_t seed = 0;
};

struct StepLoss {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct SpecializeResult {
  HeadF head;
  std::vector<StepLoss> losses;
  std::size_t skipped_batches = 0;
};

/// Fine-tune `head` on `pairs` (indices are rows of `x`): per epoch the
/// pairs are shuffled and cut into batches of `batch_pairs`; each batch is
/// hard-mined and takes one AdamW step under warmup + cosine decay.
/// Batches lacking one polarity are skipped with a warning.
SpecializeResult specialize(HeadF head, const RowMatrixF& x, const PairSet& pairs,
                            const CtsConfig& config);

/// "CTSH", u32 version (1), u32 dim, u32 flags (bit 0: residual), then W
/// (dim*dim, row-major) and b (dim) as little-endian f32.
void save_head(const HeadF& head, const std::filesystem::path& path);
HeadF load_head(const std::filesystem::path& path);

/// CSV with header "step,lr,loss".
void write_loss_curve_csv(std::ostream& out, std::span<const StepLoss> losses);

}  // namespace cts
