#include "lats/ts/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "lats/common/errors.hpp"
#include "lats/common/hash.hpp"

namespace lats::ts {

std::vector<double> hash_embed(const std::string& text, std::size_t dim, std::uint64_t key) {
  if (dim == 0) throw ArgumentError("hash_embed: dim must be positive");
  std::vector<std::uint64_t> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(fnv1a64(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();

  std::vector<double> v(dim, 0.0);
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t s = 0; s + n <= tokens.size(); ++s) {
      std::uint64_t h = mix64(key ^ n);
      for (std::size_t k = 0; k < n; ++k) h = mix64(h ^ tokens[s + k]);
      const double sign = (h >> 63) ? -1.0 : 1.0;
      v[(h >> 1) % dim] += sign;
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) {
    v[0] = 1.0;  // empty text: fixed unit vector
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Embedding> HashEmbedProvider::embed(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back({hash_embed(t, dim_, key_), "hash"});
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec) {
  if (spec == "hash") return std::make_unique<HashEmbedProvider>();
  if (spec == "http" || spec.rfind("http:", 0) == 0) {
    HttpProviderConfig cfg;
    if (spec.size() > 5) cfg.url = spec.substr(5);
    if (const char* env = std::getenv("LATS_PROVIDER_URL"); env && *env) cfg.url = env;
    if (cfg.url.empty()) throw ArgumentError("http provider needs a URL (http:<url> or LATS_PROVIDER_URL)");
    return std::make_unique<HttpEmbedProvider>(cfg);
  }
  throw ArgumentError("unknown provider '" + spec + "' (expected hash or http:<url>)");
}

EmbeddingCache::EmbeddingCache(std::size_t capacity, std::string path)
    : capacity_(capacity), path_(std::move(path)) {
  if (!path_.empty()) {
    load_file();
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw ProviderError("cannot open embedding cache '" + path_ + "' for append");
  }
}

EmbeddingCache::~EmbeddingCache() {
  if (out_.is_open()) out_.flush();
}

void EmbeddingCache::load_file() {
  std::uintmax_t good = 0;
  {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    while (true) {
      std::uint64_t h = 0;
      std::uint32_t dim = 0;
      if (!in.read(reinterpret_cast<char*>(&h), sizeof h)) break;
      if (!in.read(reinterpret_cast<char*>(&dim), sizeof dim)) break;
      std::vector<double> v(dim);
      if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)))) break;
      good += sizeof h + sizeof dim + dim * sizeof(double);
      if (map_.size() < capacity_) map_.emplace(h, std::move(v));
    }
  }
  // Drop a torn trailing record so later appends stay aligned.
  if (std::filesystem::file_size(path_) != good) std::filesystem::resize_file(path_, good);
}

std::vector<const std::vector<double>*> EmbeddingCache::lookup(const std::vector<PromptDoc>& docs,
                                                               EmbeddingProvider& provider) {
  std::vector<const std::vector<double>*> out(docs.size(), nullptr);
  std::vector<std::string> texts;
  std::vector<std::uint64_t> hashes;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> waiting;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    auto it = map_.find(docs[k].hash);
    if (it != map_.end()) {
      out[k] = &it->second;
      ++stats_.hits;
      continue;
    }
    auto& slots = waiting[docs[k].hash];
    if (slots.empty()) {
      texts.push_back(docs[k].text);
      hashes.push_back(docs[k].hash);
      ++stats_.misses;
    } else {
      ++stats_.hits;
    }
    slots.push_back(k);
  }
  if (texts.empty()) return out;

  std::vector<Embedding> got = provider.embed(texts);
  ++stats_.provider_calls;
  stats_.texts_sent += texts.size();
  if (got.size() != texts.size()) throw ProviderError("provider returned the wrong number of embeddings");

  overflow_.clear();
  overflow_.reserve(got.size());
  for (std::size_t j = 0; j < got.size(); ++j) {
    std::vector<double>& v = got[j].values;
    if (v.size() != provider.dim()) throw ProviderError("provider returned a vector of the wrong width");
    for (double x : v)
      if (!std::isfinite(x)) throw ProviderError("provider returned a non-finite embedding");
    const std::vector<double>* stored = nullptr;
    if (map_.size() < capacity_) {
      if (out_.is_open()) {
        const std::uint64_t h = hashes[j];
        const auto dim = static_cast<std::uint32_t>(v.size());
        out_.write(reinterpret_cast<const char*>(&h), sizeof h);
        out_.write(reinterpret_cast<const char*>(&dim), sizeof dim);
        out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      }
      stored = &map_.emplace(hashes[j], std::move(v)).first->second;
    } else {
      overflow_.push_back(std::move(v));
      stored = &overflow_.back();
    }
    for (std::size_t k : waiting[hashes[j]]) out[k] = stored;
  }
  if (out_.is_open()) out_.flush();
  return out;
}

}  // namespace lats::ts
