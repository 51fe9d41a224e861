#include "cts/specialize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "binary_io.hpp"
#include "cts/error.hpp"
#include "cts/rng.hpp"
#include "log.hpp"

namespace cts {

template <class Scalar>
SpecializationHead<Scalar>::SpecializationHead(std::size_t dim, bool residual)
    : weight_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      bias_(Vector::Zero(static_cast<Eigen::Index>(dim))),
      residual_(residual) {
  if (dim == 0) throw ArgumentError("specialization head: dim must be positive");
}

namespace {

template <class Scalar>
struct HeadActivations {
  RowMatrix<Scalar> t;  // tanh(xW + b)
  RowMatrix<Scalar> z;  // normalized output
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norms;  // ||y|| per row
};

template <class Scalar>
HeadActivations<Scalar> forward(const SpecializationHead<Scalar>& head,
                                const RowMatrix<Scalar>& x) {
  if (static_cast<std::size_t>(x.cols()) != head.dim())
    throw ArgumentError("head: input width " + std::to_string(x.cols()) + " != head dim " +
                        std::to_string(head.dim()));
  HeadActivations<Scalar> a;
  a.t = ((x * head.weight()).rowwise() + head.bias()).array().tanh().matrix();
  RowMatrix<Scalar> y = head.residual() ? RowMatrix<Scalar>(x + a.t) : a.t;
  a.norms = y.rowwise().norm();
  a.z = std::move(y);
  for (Eigen::Index r = 0; r < a.z.rows(); ++r) {
    if (static_cast<double>(a.norms(r)) < kZeroNormGuard)
      a.z.row(r).setZero();
    else
      a.z.row(r) /= a.norms(r);
  }
  return a;
}

bool zero_row(double norm) { return norm < kZeroNormGuard; }

}  // namespace

template <class Scalar>
typename SpecializationHead<Scalar>::Matrix SpecializationHead<Scalar>::encode(
    const Matrix& x) const {
  return forward(*this, x).z;
}

EmbeddingMatrix head_encode(const HeadF& head, const EmbeddingMatrix& x) {
  if (x.dim() != head.dim())
    throw ArgumentError("head_encode: embedding dim " + std::to_string(x.dim()) +
                        " != head dim " + std::to_string(head.dim()));
  auto act = forward(head, x.rows());
  std::size_t zeros = 0;
  for (Eigen::Index r = 0; r < act.norms.size(); ++r) zeros += zero_row(act.norms(r)) ? 1 : 0;
  if (zeros > 0) detail::logger().warn("head_encode: {} zero-norm row(s) left as zero", zeros);
  return EmbeddingMatrix(x.ids(), std::move(act.z));
}

template <class Scalar>
PairDistances pair_distances(const RowMatrix<Scalar>& z, std::span<const SentencePair> pairs) {
  PairDistances out;
  for (const auto& p : pairs) {
    if (p.i >= z.rows() || p.j >= z.rows())
      throw ArgumentError("pair_distances: pair index out of range");
    const double d = 1.0 - static_cast<double>(z.row(p.i).dot(z.row(p.j)));
    (p.polarity == Polarity::positive ? out.positive : out.negative)
        .push_back(std::clamp(d, 0.0, 2.0));
  }
  return out;
}

HardSelection ocl_select_hard(std::span<const double> pos_d, std::span<const double> neg_d) {
  if (pos_d.empty() || neg_d.empty())
    throw ArgumentError("ocl_select_hard: batch needs both polarities");
  const double max_pos = *std::max_element(pos_d.begin(), pos_d.end());
  const double min_neg = *std::min_element(neg_d.begin(), neg_d.end());
  HardSelection sel;
  for (std::size_t j = 0; j < neg_d.size(); ++j) {
    if (neg_d[j] < max_pos) sel.negative.push_back(j);
  }
  for (std::size_t i = 0; i < pos_d.size(); ++i) {
    if (pos_d[i] > min_neg) sel.positive.push_back(i);
  }
  if (sel.negative.empty()) {
    sel.negative_fallback = true;
    for (std::size_t j = 0; j < neg_d.size(); ++j) sel.negative.push_back(j);
  }
  if (sel.positive.empty()) {
    sel.positive_fallback = true;
    for (std::size_t i = 0; i < pos_d.size(); ++i) sel.positive.push_back(i);
  }
  return sel;
}

double contrastive_loss(std::span<const double> pos_d, std::span<const double> neg_d,
                        double margin) {
  const auto count = pos_d.size() + neg_d.size();
  if (count == 0) return 0.0;
  double total = 0.0;
  for (const double d : pos_d) total += 0.5 * d * d;
  for (const double d : neg_d) {
    const double gap = std::max(0.0, margin - d);
    total += 0.5 * gap * gap;
  }
  return total / static_cast<double>(count);
}

namespace {

template <class Scalar>
std::optional<double> ocl_objective_impl(const SpecializationHead<Scalar>& head,
                                         const RowMatrix<Scalar>& x,
                                         std::span<const SentencePair> pairs, double margin,
                                         HeadGradient<Scalar>* grad) {
  // Gather the rows this batch touches.
  std::unordered_map<std::uint32_t, Eigen::Index> local;
  std::vector<std::uint32_t> rows;
  for (const auto& p : pairs) {
    for (const auto r : {p.i, p.j}) {
      if (r >= x.rows()) throw ArgumentError("ocl: pair index out of range");
      if (local.emplace(r, static_cast<Eigen::Index>(rows.size())).second) rows.push_back(r);
    }
  }
  RowMatrix<Scalar> xb(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) xb.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  const auto act = forward(head, xb);

  struct Item {
    Eigen::Index a, b;
    double raw;
  };
  std::vector<Item> pos, neg;
  std::vector<double> pos_d, neg_d;
  for (const auto& p : pairs) {
    const auto a = local.at(p.i);
    const auto b = local.at(p.j);
    if (zero_row(static_cast<double>(act.norms(a))) || zero_row(static_cast<double>(act.norms(b))))
      continue;
    const double raw = 1.0 - static_cast<double>(act.z.row(a).dot(act.z.row(b)));
    if (p.polarity == Polarity::positive) {
      pos.push_back({a, b, raw});
      pos_d.push_back(std::clamp(raw, 0.0, 2.0));
    } else {
      neg.push_back({a, b, raw});
      neg_d.push_back(std::clamp(raw, 0.0, 2.0));
    }
  }
  if (pos.empty() || neg.empty()) return std::nullopt;

  const auto sel = ocl_select_hard(pos_d, neg_d);
  std::vector<double> sp, sn;
  for (const auto i : sel.positive) sp.push_back(pos_d[i]);
  for (const auto j : sel.negative) sn.push_back(neg_d[j]);
  const double loss = contrastive_loss(sp, sn, margin);

  if (grad != nullptr) {
    const double inv_count = 1.0 / static_cast<double>(sp.size() + sn.size());
    RowMatrix<Scalar> dz = RowMatrix<Scalar>::Zero(act.z.rows(), act.z.cols());
    auto accumulate = [&](const Item& it, double dloss_dd) {
      if (it.raw < 0.0 || it.raw > 2.0) return;  // clamped: flat
      const auto c = static_cast<Scalar>(-dloss_dd);
      dz.row(it.a) += c * act.z.row(it.b);
      dz.row(it.b) += c * act.z.row(it.a);
    };
    for (const auto i : sel.positive) accumulate(pos[i], pos_d[i] * inv_count);
    for (const auto j : sel.negative)
      accumulate(neg[j], -std::max(0.0, margin - neg_d[j]) * inv_count);

    // Through the normalization: dy = (dz - z (z.dz)) / ||y||.
    RowMatrix<Scalar> dpre(dz.rows(), dz.cols());
    for (Eigen::Index r = 0; r < dz.rows(); ++r) {
      if (zero_row(static_cast<double>(act.norms(r)))) {
        dpre.row(r).setZero();
        continue;
      }
      const Scalar proj = act.z.row(r).dot(dz.row(r));
      dpre.row(r) = (dz.row(r) - proj * act.z.row(r)) / act.norms(r);
    }
    dpre.array() *= (Scalar(1) - act.t.array().square());
    grad->weight.noalias() = xb.transpose() * dpre;
    grad->bias = dpre.colwise().sum();
  }
  return loss;
}

}  // namespace

template <class Scalar>
double ocl_objective(const SpecializationHead<Scalar>& head, const RowMatrix<Scalar>& x,
                     std::span<const SentencePair> pairs, double margin,
                     HeadGradient<Scalar>* grad) {
  const auto loss = ocl_objective_impl(head, x, pairs, margin, grad);
  if (!loss) throw DegenerateInputError("ocl: batch lacks a positive or a negative pair");
  return *loss;
}

SpecializeResult specialize(HeadF head, const RowMatrixF& x, const PairSet& pairs,
                            const CtsConfig& config) {
  if (!(config.margin > 0.0)) throw ArgumentError("specialize: margin must be positive");
  if (config.batch_pairs < 2) throw ArgumentError("specialize: batch_pairs must be >= 2");
  if (static_cast<std::size_t>(x.cols()) != head.dim())
    throw ArgumentError("specialize: embedding dim != head dim");
  if (!x.allFinite()) throw ArgumentError("specialize: non-finite embeddings");

  SpecializeResult result{std::move(head), {}, 0};
  if (config.epochs == 0) return result;
  if (pairs.positives.empty() || pairs.negatives.empty())
    throw ArgumentError("specialize: pair set needs both positive and negative pairs");

  auto all = pairs.all();
  for (const auto& p : all) {
    if (p.i >= x.rows() || p.j >= x.rows())
      throw ArgumentError("specialize: pair index out of range");
  }
  const std::size_t per_epoch = (all.size() + config.batch_pairs - 1) / config.batch_pairs;
  const LrSchedule schedule(config.epochs * per_epoch, config.warmup_ratio);

  auto& h = result.head;
  HeadGradient<float> g{RowMatrixF::Zero(h.weight().rows(), h.weight().cols()),
                        Eigen::RowVectorXf::Zero(h.bias().size())};
  auto blocks = [&] {
    return std::vector<ParamBlock<float>>{
        {"head.weight", {h.weight().data(), static_cast<std::size_t>(h.weight().size())},
         {g.weight.data(), static_cast<std::size_t>(g.weight.size())}},
        {"head.bias", {h.bias().data(), static_cast<std::size_t>(h.bias().size())},
         {g.bias.data(), static_cast<std::size_t>(g.bias.size())}}};
  };
  auto state = AdamWState<float>::for_blocks(
      {.lr = config.lr, .weight_decay = config.weight_decay}, blocks());

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {epoch}));
    rng.shuffle(all);
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const auto begin = b * config.batch_pairs;
      const auto count = std::min(config.batch_pairs, all.size() - begin);
      std::span<const SentencePair> batch(all.data() + begin, count);
      const auto loss = ocl_objective_impl(h, x, batch, config.margin, &g);
      if (!loss) {
        ++result.skipped_batches;
        detail::logger().warn("specialize: step {} batch lacks one polarity; skipped", step);
        continue;
      }
      if (!std::isfinite(*loss))
        throw NumericError("specialize: non-finite loss at step " + std::to_string(step),
                           static_cast<long long>(step));
      const double mult = schedule.lr_at(step);
      const auto bl = blocks();
      adamw_step<float>(bl, state, mult);
      result.losses.push_back({step, config.lr * mult, *loss});
    }
  }
  return result;
}

namespace {
constexpr char kHeadMagic[5] = "CTSH";
constexpr std::uint32_t kHeadVersion = 1;
}  // namespace

void save_head(const HeadF& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  detail::write_magic(out, kHeadMagic);
  detail::write_le<std::uint32_t>(out, kHeadVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(head.dim()));
  detail::write_le<std::uint32_t>(out, head.residual() ? 1u : 0u);
  detail::write_floats(out, head.weight().data(), static_cast<std::size_t>(head.weight().size()));
  detail::write_floats(out, head.bias().data(), static_cast<std::size_t>(head.bias().size()));
  if (!out) throw ArgumentError("write failed for " + path.string());
}

HeadF load_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  detail::expect_magic(in, kHeadMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kHeadVersion)
    throw FormatError("unsupported head version " + std::to_string(version));
  const auto dim = detail::read_le<std::uint32_t>(in, "dim");
  const auto flags = detail::read_le<std::uint32_t>(in, "flags");
  if (dim == 0) throw FormatError("head: zero dim");
  HeadF head(dim, (flags & 1u) != 0);
  detail::read_floats(in, head.weight().data(), static_cast<std::size_t>(head.weight().size()),
                      "weight");
  detail::read_floats(in, head.bias().data(), static_cast<std::size_t>(head.bias().size()), "bias");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("head: trailing bytes");
  if (!head.weight().allFinite() || !head.bias().allFinite())
    throw FormatError("head: non-finite parameters");
  return head;
}

void write_loss_curve_csv(std::ostream& out, std::span<const StepLoss> losses) {
  out << "step,lr,loss\n";
  char buf[96];
  for (const auto& l : losses) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", l.step, l.lr, l.loss);
    out << buf;
  }
}

template class SpecializationHead<float>;
template class SpecializationHead<double>;
template PairDistances pair_distances<float>(const RowMatrixF&, std::span<const SentencePair>);
template PairDistances pair_distances<double>(const RowMatrixD&, std::span<const SentencePair>);
template double ocl_objective<float>(const HeadF&, const RowMatrixF&,
                                     std::span<const SentencePair>, double,
                                     HeadGradient<float>*);
template double ocl_objective<double>(const HeadD&, const RowMatrixD&,
                                      std::span<const SentencePair>, double,
                                      HeadGradient<double>*);

}  // namespace cts
