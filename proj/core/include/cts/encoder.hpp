#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cts/corpus.hpp"
#include "cts/embedding.hpp"

namespace cts {

/// Source of base sentence embeddings. Implementations must return one
/// vector per input text, in input order, with a constant width, and must
/// tolerate concurrent calls when used with max_in_flight > 1.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
  /// Model identity recorded in report provenance and cache keys.
  virtual std::string descriptor() const = 0;
};

/// Client for the embedding service:
///   POST {base}/embed  {"texts": [...]}  ->  {"dim": d, "embeddings": [[...], ...]}
/// Any non-200 status or connection failure raises TransportError.
class HttpEncoderBackend final : public EncoderBackend {
 public:
  explicit HttpEncoderBackend(std::string base_url,
                              std::chrono::seconds timeout = std::chrono::seconds(60),
                              std::string model_name = {});

  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::string descriptor() const override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string url_;
  std::chrono::seconds timeout_;
  std::string model_name_;
};

/// `flag` if given, else $CTS_EMBED_URL; throws ArgumentError when neither.
std::string resolve_embed_url(const std::optional<std::string>& flag);

/// Text-keyed embedding cache shared across embed_corpus calls. Keys are
/// (backend descriptor, text) so two backends never alias. Thread-safe.
class EmbeddingCache {
 public:
  std::optional<std::vector<float>> find(const std::string& descriptor,
                                         const std::string& text) const;
  void insert(const std::string& descriptor, const std::string& text,
              std::vector<float> vector);
  std::size_t size() const;

  /// Persisted as an embedding store whose ids are SHA-256 cache keys.
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  static std::string key(const std::string& descriptor, const std::string& text);

  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  /// 0 = take the width from the backend's first response.
  std::size_t expected_dim = kDefaultEmbeddingDim;
  std::size_t max_in_flight = 1;
  RetryPolicy retry;
};

struct EmbedStats {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
};

/// One row per post, id-aligned with corpus order. Texts already in `cache`
/// are not re-embedded; new vectors are added to it.
EmbeddingMatrix embed_corpus(EncoderBackend& backend, const Corpus& corpus,
                             const EmbedOptions& options, EmbeddingCache& cache,
                             EmbedStats* stats = nullptr);

}  // namespace cts
