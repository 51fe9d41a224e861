#include "cts/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include "cts/error.hpp"
#include "cts/hash.hpp"
#include "log.hpp"

namespace cts {

std::string resolve_embed_url(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CTS_EMBED_URL"); env != nullptr && *env != '\0')
    return env;
  throw ArgumentError("no embedding service URL: pass --embed-url or set CTS_EMBED_URL");
}

std::string EmbeddingCache::key(const std::string& descriptor, const std::string& text) {
  return Sha256().update(descriptor).update("\x1f").update(text).hex_digest();
}

std::optional<std::vector<float>> EmbeddingCache::find(const std::string& descriptor,
                                                       const std::string& text) const {
  const auto k = key(descriptor, text);
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(k);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const std::string& descriptor, const std::string& text,
                            std::vector<float> vector) {
  auto k = key(descriptor, text);
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(std::move(k), std::move(vector));
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [k, _] : entries_) ids.push_back(k);
  std::sort(ids.begin(), ids.end());
  const auto dim = entries_.empty() ? 0 : entries_.begin()->second.size();
  RowMatrixF rows(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = entries_.at(ids[i]);
    if (v.size() != dim) throw IntegrityError("embedding cache: mixed widths");
    for (std::size_t d = 0; d < dim; ++d)
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v[d];
  }
  if (dim == 0) return;  // nothing worth persisting
  save_embeddings(EmbeddingMatrix(std::move(ids), std::move(rows)), path);
}

void EmbeddingCache::load(const std::filesystem::path& path) {
  const auto store = load_embeddings(path);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto row = store.rows().row(static_cast<Eigen::Index>(i));
    entries_.insert_or_assign(store.ids()[i], std::vector<float>(row.begin(), row.end()));
  }
}

namespace {

std::vector<std::vector<float>> embed_with_retry(EncoderBackend& backend,
                                                 std::span<const std::string> texts,
                                                 const RetryPolicy& retry,
                                                 std::size_t batch_index) {
  auto backoff = retry.initial_backoff;
  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      auto out = backend.embed(texts);
      if (out.size() != texts.size())
        throw IntegrityError("backend returned " + std::to_string(out.size()) +
                             " vectors for " + std::to_string(texts.size()) + " texts");
      return out;
    } catch (const TransportError& e) {
      if (attempt >= attempts)
        throw TransportError("batch " + std::to_string(batch_index) + " failed after " +
                                 std::to_string(attempts) + " attempts: " + e.what(),
                             batch_index);
      detail::logger().warn("embedding batch {} attempt {} failed: {}; retrying in {} ms",
                            batch_index, attempt, e.what(), backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace

EmbeddingMatrix embed_corpus(EncoderBackend& backend, const Corpus& corpus,
                             const EmbedOptions& options, EmbeddingCache& cache,
                             EmbedStats* stats) {
  if (options.batch_size == 0) throw ArgumentError("embed_corpus: batch_size must be >= 1");
  const auto descriptor = backend.descriptor();
  std::size_t dim = options.expected_dim;

  auto check_dim = [&](std::size_t got) {
    if (dim == 0) dim = got;
    if (got != dim)
      throw IntegrityError("embedding width " + std::to_string(got) + " != expected " +
                           std::to_string(dim));
  };

  // Distinct texts that still need embedding, in first-seen order.
  std::vector<std::string> missing;
  std::unordered_map<std::string, std::size_t> missing_index;
  EmbedStats local;
  for (const auto& p : corpus.posts()) {
    if (missing_index.contains(p.text)) continue;
    if (cache.find(descriptor, p.text)) {
      ++local.cache_hits;
      continue;
    }
    missing_index.emplace(p.text, missing.size());
    missing.push_back(p.text);
  }

  const std::size_t batches = (missing.size() + options.batch_size - 1) / options.batch_size;
  const std::size_t in_flight = std::max<std::size_t>(1, options.max_in_flight);
  for (std::size_t wave = 0; wave < batches; wave += in_flight) {
    const std::size_t wave_end = std::min(batches, wave + in_flight);
    std::vector<std::future<std::vector<std::vector<float>>>> pending;
    for (std::size_t b = wave; b < wave_end; ++b) {
      const auto begin = b * options.batch_size;
      const auto count = std::min(options.batch_size, missing.size() - begin);
      std::span<const std::string> texts(missing.data() + begin, count);
      auto policy = in_flight == 1 ? std::launch::deferred : std::launch::async;
      pending.push_back(std::async(policy, [&backend, texts, &options, b] {
        return embed_with_retry(backend, texts, options.retry, b);
      }));
    }
    // Reassemble in input order.
    for (std::size_t b = wave; b < wave_end; ++b) {
      auto vectors = pending[b - wave].get();
      ++local.backend_calls;
      const auto begin = b * options.batch_size;
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        check_dim(vectors[i].size());
        if (!std::all_of(vectors[i].begin(), vectors[i].end(),
                         [](float x) { return std::isfinite(x); }))
          throw IntegrityError("backend returned non-finite embedding in batch " +
                               std::to_string(b));
        cache.insert(descriptor, missing[begin + i], std::move(vectors[i]));
      }
    }
  }

  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  RowMatrixF rows;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus[i];
    auto v = cache.find(descriptor, p.text);
    if (!v) throw IntegrityError("cache lost entry for post '" + p.id + "'");
    check_dim(v->size());
    if (rows.rows() == 0) rows.resize(static_cast<Eigen::Index>(corpus.size()),
                                      static_cast<Eigen::Index>(dim));
    rows.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(v->data(), static_cast<Eigen::Index>(v->size()));
    ids.push_back(p.id);
  }
  if (corpus.size() == 0) rows.resize(0, static_cast<Eigen::Index>(dim));
  if (stats != nullptr) *stats = local;
  return EmbeddingMatrix(std::move(ids), std::move(rows));
}

}  // namespace cts
