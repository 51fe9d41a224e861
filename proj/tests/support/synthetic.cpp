#include "synthetic.hpp"

#include <random>

#include "cts/error.hpp"
#include "cts/hash.hpp"
#include "cts/rng.hpp"

namespace cts::test {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto base = fs::temp_directory_path();
  std::random_device rd;
  for (;;) {
    path_ = base / ("cts-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Ontology numbered_ontology(std::size_t labels, TaskKind kind, bool with_irrelevant) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < labels; ++i) names.push_back("L" + std::to_string(i));
  std::vector<std::string> irrelevant;
  if (with_irrelevant) irrelevant.push_back("L0");
  return Ontology(kind, names, irrelevant);
}

Corpus corpus_from_labels(const std::vector<LabelSet>& labels, TaskKind kind,
                          std::size_t label_count, std::size_t events, const std::string& name) {
  std::vector<Post> posts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    posts.push_back({"p" + std::to_string(i), "e" + std::to_string(i % events),
                     "text " + std::to_string(i), labels[i]});
  }
  return Corpus(name, numbered_ontology(label_count, kind), std::move(posts));
}

RowMatrixD class_centres(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrixD c(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = rng.normal();
    c.row(i).normalize();
  }
  return c;
}

RowMatrixF cluster_points(const RowMatrixD& centres, const std::vector<LabelId>& labels,
                          const ClusterSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrixF x(static_cast<Eigen::Index>(labels.size()), centres.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double v = centres(labels[i], j) + spec.noise * rng.normal();
      if (static_cast<std::size_t>(j) < spec.nuisance_dims) v += spec.nuisance * rng.normal();
      x(r, j) = static_cast<float>(v);
    }
  }
  return x;
}

namespace {

Dataset make_dataset(const std::string& name, const Ontology& ontology, std::vector<Post> posts,
                     RowMatrixF rows) {
  std::vector<std::string> ids;
  for (const auto& p : posts) ids.push_back(p.id);
  Corpus corpus(name, ontology, std::move(posts));
  return Dataset{std::move(corpus), EmbeddingMatrix(std::move(ids), std::move(rows)), "synthetic"};
}

}  // namespace

Dataset cluster_dataset(std::size_t classes, std::size_t events, std::size_t per_event,
                        const ClusterSpec& spec, std::uint64_t seed, const std::string& name) {
  std::vector<LabelId> labels;
  std::vector<Post> posts;
  for (std::size_t e = 0; e < events; ++e) {
    for (std::size_t k = 0; k < per_event; ++k) {
      // Round-robin keeps every class present in every event.
      const auto label = static_cast<LabelId>(k % classes);
      labels.push_back(label);
      const auto i = posts.size();
      posts.push_back({"p" + std::to_string(i), "e" + std::to_string(e), "text " + std::to_string(i), {label}});
    }
  }
  const auto centres = class_centres(classes, spec.dim, derive_seed(seed, {2}));
  auto rows = cluster_points(centres, labels, spec, derive_seed(seed, {3}));
  return make_dataset(name, numbered_ontology(classes, TaskKind::multi_class), std::move(posts),
                      std::move(rows));
}

Dataset multilabel_cluster_dataset(std::size_t labels, std::size_t events, std::size_t per_event,
                                   const ClusterSpec& spec, std::uint64_t seed, const std::string& name) {
  Rng rng(derive_seed(seed, {1}));
  const auto centres = class_centres(labels, spec.dim, derive_seed(seed, {2}));
  std::vector<Post> posts;
  std::vector<LabelSet> sets;
  for (std::size_t e = 0; e < events; ++e) {
    for (std::size_t k = 0; k < per_event; ++k) {
      LabelSet s{static_cast<LabelId>(k % labels)};
      if (rng.bernoulli(0.3)) {
        const auto extra = static_cast<LabelId>(rng.uniform_index(labels));
        if (extra != s.front()) s.push_back(extra);
        std::sort(s.begin(), s.end());
      }
      const auto i = posts.size();
      posts.push_back({"p" + std::to_string(i), "e" + std::to_string(e), "text " + std::to_string(i), s});
      sets.push_back(s);
    }
  }
  Rng noise(derive_seed(seed, {3}));
  RowMatrixF rows(static_cast<Eigen::Index>(posts.size()), static_cast<Eigen::Index>(spec.dim));
  for (std::size_t i = 0; i < posts.size(); ++i) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      double v = 0;
      for (const auto l : sets[i]) v += centres(l, static_cast<Eigen::Index>(j));
      v /= static_cast<double>(sets[i].size());
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(v + spec.noise * noise.normal());
    }
  }
  return make_dataset(name, numbered_ontology(labels, TaskKind::multi_label), std::move(posts),
                      std::move(rows));
}

std::vector<float> FakeBackend::vector_for(const std::string& text, std::size_t dim) {
  const auto digest = sha256_hex(text);
  Rng rng(std::stoull(digest.substr(0, 16), nullptr, 16));
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

std::vector<std::vector<float>> FakeBackend::embed(std::span<const std::string> texts) {
  ++calls_;
  if (fail_first_.load() > 0) {
    --fail_first_;
    throw TransportError("fake backend: injected failure");
  }
  std::vector<std::vector<float>> out;
  for (const auto& t : texts) out.push_back(vector_for(t, dim_));
  return out;
}

}  // namespace cts::test
