#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lats/ts/prompt.hpp"

namespace lats::ts {

inline constexpr std::size_t kEmbeddingDim = 512;

struct Embedding {
  std::vector<double> values;
  std::string provider;
};

/// Maps texts to fixed-width vectors. Implementations are pure (same text,
/// same vector) and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string tag() const = 0;
  /// Throws ProviderError on transport or schema failures.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
};

/// Keyed hash of lowercase alphanumeric token uni/bi/tri-grams into signed
/// buckets, L2-normalized. Texts sharing n-grams land closer together.
std::vector<double> hash_embed(const std::string& text, std::size_t dim = kEmbeddingDim,
                               std::uint64_t key = 0x4c415453ULL);

class HashEmbedProvider : public EmbeddingProvider {
 public:
  explicit HashEmbedProvider(std::size_t dim = kEmbeddingDim, std::uint64_t key = 0x4c415453ULL)
      : dim_(dim), key_(key) {}
  std::size_t dim() const override { return dim_; }
  std::string tag() const override { return "hash"; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
  std::uint64_t key_;
};

struct HttpProviderConfig {
  std::string url;             // scheme://host:port
  std::string model = "default";
  std::size_t max_batch = 32;  // texts per POST
  int timeout_s = 60;
};

/// Client for the embedding service: GET /info at construction declares the
/// width, POST /embed returns one vector per text in request order.
class HttpEmbedProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbedProvider(HttpProviderConfig cfg);
  std::size_t dim() const override { return dim_; }
  std::string tag() const override { return "http:" + cfg_.url; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  std::size_t requests() const { return requests_; }

 private:
  HttpProviderConfig cfg_;
  std::size_t dim_ = 0;
  std::size_t requests_ = 0;
  std::mutex mu_;
};

/// Validates a /embed response body against the wire schema.
std::vector<std::vector<double>> parse_embed_response(const std::string& body, std::size_t expected_count,
                                                      std::size_t expected_dim);
/// Validates a /info response body; returns the declared width.
std::size_t parse_info_response(const std::string& body);

/// "hash" or "http:<url>". LATS_PROVIDER_URL, when set, replaces the URL of an
/// http provider (a bare "http" spec then requires it). Throws ArgumentError.
std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec);

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t provider_calls = 0;  // embed() invocations
  std::size_t texts_sent = 0;
};

/// Prompt-hash keyed store in front of a provider. Each distinct hash is sent
/// at most once while it is retained. Once `capacity` entries are held new
/// entries are served but not retained. With a path, retained entries are
/// appended as (u64 hash, u32 dim, f64 values) records and reloaded on open.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::size_t capacity = 8192, std::string path = "");
  ~EmbeddingCache();

  /// One vector per doc, in order. Duplicate hashes within a call are sent once.
  std::vector<const std::vector<double>*> lookup(const std::vector<PromptDoc>& docs, EmbeddingProvider& provider);

  std::size_t size() const { return map_.size(); }
  const CacheStats& stats() const { return stats_; }
  bool contains(std::uint64_t hash) const { return map_.count(hash) != 0; }

 private:
  void load_file();
  std::size_t capacity_;
  std::string path_;
  std::ofstream out_;
  std::unordered_map<std::uint64_t, std::vector<double>> map_;
  std::vector<std::vector<double>> overflow_;  // scratch for non-retained results of the last call
  CacheStats stats_;
};

}  // namespace lats::ts
