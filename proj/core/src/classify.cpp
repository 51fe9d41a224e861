#include "cts/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "cts/error.hpp"
#include "cts/metrics.hpp"
#include "cts/optim.hpp"
#include "cts/rng.hpp"

namespace cts {

template <class Scalar>
MlpClassifier<Scalar>::MlpClassifier(std::size_t input_dim, std::size_t hidden,
                                     std::size_t label_count, TaskKind task,
                                     std::uint64_t init_seed)
    : kind(task) {
  if (input_dim == 0 || hidden == 0 || label_count == 0)
    throw ArgumentError("mlp: dimensions must be positive");
  Rng rng(init_seed);
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Scalar>((2.0 * rng.uniform01() - 1.0) * a);
    return m;
  };
  w1 = glorot(input_dim, hidden);
  b1 = Vector::Zero(static_cast<Eigen::Index>(hidden));
  w2 = glorot(hidden, label_count);
  b2 = Vector::Zero(static_cast<Eigen::Index>(label_count));
}

template <class Scalar>
typename MlpClassifier<Scalar>::Matrix MlpClassifier<Scalar>::logits(const Matrix& x) const {
  if (x.cols() != w1.rows())
    throw ArgumentError("mlp: input width " + std::to_string(x.cols()) + " != " +
                        std::to_string(w1.rows()));
  Matrix h = ((x * w1).rowwise() + b1).cwiseMax(Scalar(0));
  return (h * w2).rowwise() + b2;
}

template <class Scalar>
double ce_loss(const RowMatrix<Scalar>& logits, std::span<const LabelId> labels,
               RowMatrix<Scalar>* dlogits) {
  const auto n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ArgumentError("ce_loss: batch/label size mismatch");
  if (dlogits != nullptr) dlogits->resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    if (y >= logits.cols()) throw ArgumentError("ce_loss: label out of range");
    const double m = static_cast<double>(logits.row(i).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      sum += std::exp(static_cast<double>(logits(i, c)) - m);
    const double lse = m + std::log(sum);
    total += lse - static_cast<double>(logits(i, y));
    if (dlogits != nullptr) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double p = std::exp(static_cast<double>(logits(i, c)) - lse);
        (*dlogits)(i, c) = static_cast<Scalar>((p - (c == y ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

template <class Scalar>
double bce_loss(const RowMatrix<Scalar>& logits, std::span<const LabelSet> labels,
                RowMatrix<Scalar>* dlogits) {
  const auto n = logits.rows();
  const auto L = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ArgumentError("bce_loss: batch/label size mismatch");
  if (dlogits != nullptr) dlogits->resize(n, L);
  const double scale = n * L == 0 ? 0.0 : 1.0 / static_cast<double>(n * L);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& gold = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < L; ++c) {
      const double z = static_cast<double>(logits(i, c));
      const double y =
          std::binary_search(gold.begin(), gold.end(), static_cast<LabelId>(c)) ? 1.0 : 0.0;
      // max(z, 0) - z*y + log(1 + exp(-|z|))
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      if (dlogits != nullptr) (*dlogits)(i, c) = static_cast<Scalar>((sigmoid(z) - y) * scale);
    }
  }
  return total * scale;
}

template <class Scalar>
double mlp_objective(const MlpClassifier<Scalar>& clf, const RowMatrix<Scalar>& x,
                     std::span<const LabelSet> labels, const RowMatrix<Scalar>* dropout_mask,
                     MlpGradient<Scalar>* grad) {
  if (x.cols() != clf.w1.rows()) throw ArgumentError("mlp: input width mismatch");
  const RowMatrix<Scalar> pre = (x * clf.w1).rowwise() + clf.b1;
  RowMatrix<Scalar> h = pre.cwiseMax(Scalar(0));
  if (dropout_mask != nullptr) h.array() *= dropout_mask->array();
  const RowMatrix<Scalar> logits = (h * clf.w2).rowwise() + clf.b2;

  RowMatrix<Scalar> dlogits;
  RowMatrix<Scalar>* dl = grad != nullptr ? &dlogits : nullptr;
  double loss = 0.0;
  if (clf.kind == TaskKind::multi_class) {
    std::vector<LabelId> single;
    single.reserve(labels.size());
    for (const auto& s : labels) {
      if (s.size() != 1) throw ArgumentError("mlp: multi-class target needs exactly one label");
      single.push_back(s.front());
    }
    loss = ce_loss(logits, single, dl);
  } else {
    loss = bce_loss(logits, labels, dl);
  }
  if (grad != nullptr) {
    grad->w2.noalias() = h.transpose() * dlogits;
    grad->b2 = dlogits.colwise().sum();
    RowMatrix<Scalar> dh = dlogits * clf.w2.transpose();
    if (dropout_mask != nullptr) dh.array() *= dropout_mask->array();
    dh.array() *= (pre.array() > Scalar(0)).template cast<Scalar>();
    grad->w1.noalias() = x.transpose() * dh;
    grad->b1 = dh.colwise().sum();
  }
  return loss;
}

LabelId argmax_label(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("argmax_label: empty logits");
  return static_cast<LabelId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

LabelSet threshold_labels(std::span<const double> probabilities, double threshold) {
  LabelSet out;
  for (std::size_t l = 0; l < probabilities.size(); ++l) {
    if (probabilities[l] >= threshold) out.push_back(static_cast<LabelId>(l));
  }
  return out;
}

namespace {

std::vector<double> row_logits(const MlpF& clf, std::span<const float> x) {
  if (x.size() != clf.input_dim())
    throw ArgumentError("predict: input width " + std::to_string(x.size()) + " != " +
                        std::to_string(clf.input_dim()));
  RowMatrixF row = Eigen::Map<const RowMatrixF>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  const RowMatrixF z = clf.logits(row);
  return std::vector<double>(z.data(), z.data() + z.size());
}

LabelSet decode(const MlpF& clf, std::span<const double> logits, double threshold,
                bool argmax_fallback) {
  if (clf.kind == TaskKind::multi_class) return {argmax_label(logits)};
  std::vector<double> probs(logits.size());
  std::transform(logits.begin(), logits.end(), probs.begin(), sigmoid);
  auto out = threshold_labels(probs, threshold);
  if (out.empty() && argmax_fallback) out.push_back(argmax_label(logits));
  return out;
}

}  // namespace

LabelId predict_multiclass(const MlpF& clf, std::span<const float> x) {
  return argmax_label(row_logits(clf, x));
}

LabelSet predict_multilabel(const MlpF& clf, std::span<const float> x, double threshold,
                            bool argmax_fallback) {
  const auto logits = row_logits(clf, x);
  std::vector<double> probs(logits.size());
  std::transform(logits.begin(), logits.end(), probs.begin(), sigmoid);
  auto out = threshold_labels(probs, threshold);
  if (out.empty() && argmax_fallback) out.push_back(argmax_label(logits));
  return out;
}

std::vector<LabelSet> predict(const MlpF& clf, const RowMatrixF& x, double threshold,
                              bool argmax_fallback) {
  const RowMatrixF z = clf.logits(x);
  std::vector<LabelSet> out;
  out.reserve(static_cast<std::size_t>(z.rows()));
  std::vector<double> logits(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) logits[static_cast<std::size_t>(c)] = z(r, c);
    out.push_back(decode(clf, logits, threshold, argmax_fallback));
  }
  return out;
}

TrainResult train_classifier(const RowMatrixF& x_train, std::span<const LabelSet> y_train,
                             const RowMatrixF& x_val, std::span<const LabelSet> y_val,
                             std::size_t label_count, TaskKind kind,
                             const ClassifierConfig& config) {
  if (config.epochs == 0) throw ArgumentError("train_classifier: epochs must be >= 1");
  if (config.batch == 0) throw ArgumentError("train_classifier: batch must be >= 1");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0))
    throw ArgumentError("train_classifier: dropout must be in [0, 1)");
  if (!(config.threshold > 0.0 && config.threshold < 1.0))
    throw ArgumentError("train_classifier: threshold must be in (0, 1)");
  if (static_cast<std::size_t>(x_train.rows()) != y_train.size() || y_train.empty())
    throw ArgumentError("train_classifier: training rows and labels misaligned or empty");
  if (x_val.rows() == 0 || static_cast<std::size_t>(x_val.rows()) != y_val.size())
    throw ArgumentError("train_classifier: empty or misaligned validation split");
  if (x_val.cols() != x_train.cols())
    throw ArgumentError("train_classifier: validation width mismatch");

  const auto n = static_cast<std::size_t>(x_train.rows());
  const auto dim = static_cast<std::size_t>(x_train.cols());
  TrainResult result;
  MlpF clf(dim, config.hidden, label_count, kind, derive_seed(config.seed, {0}));
  MlpGradient<float> g;
  g.w1 = RowMatrixF::Zero(clf.w1.rows(), clf.w1.cols());
  g.b1 = Eigen::RowVectorXf::Zero(clf.b1.size());
  g.w2 = RowMatrixF::Zero(clf.w2.rows(), clf.w2.cols());
  g.b2 = Eigen::RowVectorXf::Zero(clf.b2.size());
  auto block = [](auto& v, auto& gv, const char* name) {
    return ParamBlock<float>{name, {v.data(), static_cast<std::size_t>(v.size())},
                             {gv.data(), static_cast<std::size_t>(gv.size())}};
  };
  auto blocks = [&] {
    return std::vector<ParamBlock<float>>{block(clf.w1, g.w1, "mlp.w1"), block(clf.b1, g.b1, "mlp.b1"),
                                          block(clf.w2, g.w2, "mlp.w2"), block(clf.b2, g.b2, "mlp.b2")};
  };
  auto state = AdamWState<float>::for_blocks(
      {.lr = config.lr, .weight_decay = config.weight_decay}, blocks());

  const float keep_scale = static_cast<float>(1.0 / (1.0 - config.dropout));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool have_best = false;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, {1, epoch}));
    shuffle_rng.shuffle(order);
    Rng dropout_rng(derive_seed(config.seed, {2, epoch}));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch, ++step) {
      const auto count = std::min(config.batch, n - begin);
      RowMatrixF xb(static_cast<Eigen::Index>(count), x_train.cols());
      std::vector<LabelSet> yb;
      yb.reserve(count);
      for (std::size_t k = 0; k < count; ++k) {
        xb.row(static_cast<Eigen::Index>(k)) = x_train.row(static_cast<Eigen::Index>(order[begin + k]));
        yb.push_back(y_train[order[begin + k]]);
      }
      RowMatrixF mask(static_cast<Eigen::Index>(count), clf.w1.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = dropout_rng.bernoulli(config.dropout) ? 0.0f : keep_scale;
      const double loss = mlp_objective<float>(clf, xb, yb, config.dropout > 0 ? &mask : nullptr, &g);
      if (!std::isfinite(loss))
        throw NumericError("train_classifier: non-finite loss at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(step),
                           static_cast<long long>(epoch));
      const auto bl = blocks();
      adamw_step<float>(bl, state, 1.0);
      loss_sum += loss;
      ++batches;
    }

    const auto val_pred = predict(clf, x_val, config.threshold, config.argmax_fallback);
    const double val_f1 = f1_scores(val_pred, y_val, label_count, kind).macro;
    result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_f1});
    if (!have_best || val_f1 > result.best_val_macro_f1) {
      have_best = true;
      result.best_val_macro_f1 = val_f1;
      result.best_epoch = epoch;
      result.classifier = clf;
    }
  }
  return result;
}

namespace {
constexpr char kClfMagic[5] = "CTSC";
constexpr std::uint32_t kClfVersion = 1;
}  // namespace

void save_classifier(const MlpF& clf, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  detail::write_magic(out, kClfMagic);
  detail::write_le<std::uint32_t>(out, kClfVersion);
  detail::write_le<std::uint32_t>(out, clf.kind == TaskKind::multi_class ? 0u : 1u);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clf.input_dim()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clf.hidden()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clf.label_count()));
  detail::write_floats(out, clf.w1.data(), static_cast<std::size_t>(clf.w1.size()));
  detail::write_floats(out, clf.b1.data(), static_cast<std::size_t>(clf.b1.size()));
  detail::write_floats(out, clf.w2.data(), static_cast<std::size_t>(clf.w2.size()));
  detail::write_floats(out, clf.b2.data(), static_cast<std::size_t>(clf.b2.size()));
  if (!out) throw ArgumentError("write failed for " + path.string());
}

MlpF load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  detail::expect_magic(in, kClfMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kClfVersion)
    throw FormatError("unsupported classifier version " + std::to_string(version));
  const auto kind = detail::read_le<std::uint32_t>(in, "task kind");
  const auto in_dim = detail::read_le<std::uint32_t>(in, "input dim");
  const auto hidden = detail::read_le<std::uint32_t>(in, "hidden");
  const auto labels = detail::read_le<std::uint32_t>(in, "labels");
  if (kind > 1 || in_dim == 0 || hidden == 0 || labels == 0)
    throw FormatError("classifier: bad header");
  MlpF clf;
  clf.kind = kind == 0 ? TaskKind::multi_class : TaskKind::multi_label;
  clf.w1.resize(in_dim, hidden);
  clf.b1.resize(hidden);
  clf.w2.resize(hidden, labels);
  clf.b2.resize(labels);
  detail::read_floats(in, clf.w1.data(), static_cast<std::size_t>(clf.w1.size()), "w1");
  detail::read_floats(in, clf.b1.data(), static_cast<std::size_t>(clf.b1.size()), "b1");
  detail::read_floats(in, clf.w2.data(), static_cast<std::size_t>(clf.w2.size()), "w2");
  detail::read_floats(in, clf.b2.data(), static_cast<std::size_t>(clf.b2.size()), "b2");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("classifier: trailing bytes");
  return clf;
}

template class MlpClassifier<float>;
template class MlpClassifier<double>;
template double ce_loss<float>(const RowMatrixF&, std::span<const LabelId>, RowMatrixF*);
template double ce_loss<double>(const RowMatrixD&, std::span<const LabelId>, RowMatrixD*);
template double bce_loss<float>(const RowMatrixF&, std::span<const LabelSet>, RowMatrixF*);
template double bce_loss<double>(const RowMatrixD&, std::span<const LabelSet>, RowMatrixD*);
template double mlp_objective<float>(const MlpF&, const RowMatrixF&, std::span<const LabelSet>,
                                     const RowMatrixF*, MlpGradient<float>*);
template double mlp_objective<double>(const MlpD&, const RowMatrixD&, std::span<const LabelSet>,
                                      const RowMatrixD*, MlpGradient<double>*);

}  // namespace cts
