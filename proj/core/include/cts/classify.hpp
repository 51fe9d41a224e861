#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cts/corpus.hpp"
#include "cts/embedding.hpp"

namespace cts {

inline constexpr std::size_t kDefaultHiddenSize = 512;
inline constexpr double kDefaultThreshold = 0.3;

/// One-hidden-layer MLP over frozen embeddings:
///   logits = relu(x W1 + b1) [dropout] W2 + b2
/// Dropout (inverted) is applied only by the training loop.
template <class Scalar>
class MlpClassifier {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  MlpClassifier() = default;
  /// Glorot-uniform weights from `init_seed`, zero biases.
  MlpClassifier(std::size_t input_dim, std::size_t hidden, std::size_t label_count,
                TaskKind kind, std::uint64_t init_seed);

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden() const noexcept { return static_cast<std::size_t>(w1.cols()); }
  std::size_t label_count() const noexcept { return static_cast<std::size_t>(w2.cols()); }
  TaskKind task_kind() const noexcept { return kind; }

  /// Evaluation-mode logits (no dropout). Throws ArgumentError on width mismatch.
  Matrix logits(const Matrix& x) const;

  template <class Other>
  MlpClassifier<Other> cast() const {
    MlpClassifier<Other> out;
    out.w1 = w1.template cast<Other>();
    out.b1 = b1.template cast<Other>();
    out.w2 = w2.template cast<Other>();
    out.b2 = b2.template cast<Other>();
    out.kind = kind;
    return out;
  }

  friend bool operator==(const MlpClassifier& a, const MlpClassifier& b) {
    return a.kind == b.kind && a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() &&
           a.w2.cols() == b.w2.cols() && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 &&
           a.b2 == b.b2;
  }

  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  TaskKind kind = TaskKind::multi_class;
};

using MlpF = MlpClassifier<float>;
using MlpD = MlpClassifier<double>;

/// Mean softmax cross-entropy (log-sum-exp form) over the batch. Fills
/// dlogits with the gradient of that mean when non-null.
template <class Scalar>
double ce_loss(const RowMatrix<Scalar>& logits, std::span<const LabelId> labels,
               RowMatrix<Scalar>* dlogits = nullptr);

/// Binary cross-entropy with logits, averaged over batch x labels.
template <class Scalar>
double bce_loss(const RowMatrix<Scalar>& logits, std::span<const LabelSet> labels,
                RowMatrix<Scalar>* dlogits = nullptr);

template <class Scalar>
struct MlpGradient {
  RowMatrix<Scalar> w1;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> b1;
  RowMatrix<Scalar> w2;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> b2;
};

/// Task loss of the classifier on a batch (CE for multi-class with the
/// single gold label of each set, BCE for multi-label). `dropout_mask`,
/// when given, multiplies the hidden activations (values 0 or 1/(1-p)).
template <class Scalar>
double mlp_objective(const MlpClassifier<Scalar>& clf, const RowMatrix<Scalar>& x,
                     std::span<const LabelSet> labels, const RowMatrix<Scalar>* dropout_mask,
                     MlpGradient<Scalar>* grad);

struct ClassifierConfig {
  std::size_t epochs = 30;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t batch = 32;
  double dropout = 0.4;
  std::size_t hidden = kDefaultHiddenSize;
  double threshold = kDefaultThreshold;
  /// Multi-label: predict the top label when nothing clears the threshold.
  bool argmax_fallback = false;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  MlpF classifier;
  std::size_t best_epoch = 0;
  double best_val_macro_f1 = 0.0;
  std::vector<EpochRecord> history;
};

/// Train with seeded shuffling and dropout; after every epoch score macro F1
/// on the validation rows (dropout off) and keep the best epoch's
/// parameters, earliest on ties.
TrainResult train_classifier(const RowMatrixF& x_train, std::span<const LabelSet> y_train,
                             const RowMatrixF& x_val, std::span<const LabelSet> y_val,
                             std::size_t label_count, TaskKind kind,
                             const ClassifierConfig& config);

/// Lowest index among the maximal logits.
LabelId argmax_label(std::span<const double> logits);

/// {l : p_l >= threshold}.
LabelSet threshold_labels(std::span<const double> probabilities, double threshold);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

LabelId predict_multiclass(const MlpF& clf, std::span<const float> x);
LabelSet predict_multilabel(const MlpF& clf, std::span<const float> x, double threshold,
                            bool argmax_fallback = false);

/// Decode every row of `x` according to the classifier's task kind.
std::vector<LabelSet> predict(const MlpF& clf, const RowMatrixF& x, double threshold,
                              bool argmax_fallback = false);

/// "CTSC", u32 version (1), u32 task kind, u32 input dim, u32 hidden,
/// u32 labels, then W1, b1, W2, b2 as little-endian f32.
void save_classifier(const MlpF& clf, const std::filesystem::path& path);
MlpF load_classifier(const std::filesystem::path& path);

}  // namespace cts
