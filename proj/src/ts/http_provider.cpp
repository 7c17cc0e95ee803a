#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "lats/common/errors.hpp"
#include "lats/ts/embedding.hpp"

namespace lats::ts {

using nlohmann::json;

namespace {

json parse_body(const std::string& body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string(what) + " response is not JSON: " + e.what());
  }
}

std::size_t read_dim(const json& doc, const char* what) {
  if (!doc.is_object() || !doc.contains("dim") || !doc["dim"].is_number_integer() || doc["dim"].get<long long>() <= 0) {
    throw ProviderError(std::string(what) + " response needs a positive integer 'dim'");
  }
  return doc["dim"].get<std::size_t>();
}

}  // namespace

std::size_t parse_info_response(const std::string& body) { return read_dim(parse_body(body, "/info"), "/info"); }

std::vector<std::vector<double>> parse_embed_response(const std::string& body, std::size_t expected_count,
                                                      std::size_t expected_dim) {
  json doc = parse_body(body, "/embed");
  const std::size_t dim = read_dim(doc, "/embed");
  if (dim != expected_dim) {
    throw ProviderError("/embed declared dim " + std::to_string(dim) + " but the handshake said " +
                        std::to_string(expected_dim));
  }
  if (!doc.contains("embeddings") || !doc["embeddings"].is_array()) {
    throw ProviderError("/embed response needs an 'embeddings' array");
  }
  const json& rows = doc["embeddings"];
  if (rows.size() != expected_count) {
    throw ProviderError("/embed returned " + std::to_string(rows.size()) + " vectors for " +
                        std::to_string(expected_count) + " texts");
  }
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const json& r : rows) {
    if (!r.is_array() || r.size() != dim) throw ProviderError("/embed vector has the wrong length");
    std::vector<double> v;
    v.reserve(dim);
    for (const json& x : r) {
      if (!x.is_number()) throw ProviderError("/embed vector holds a non-number");
      const double d = x.get<double>();
      if (!std::isfinite(d)) throw ProviderError("/embed vector holds a non-finite value");
      v.push_back(d);
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbedProvider::HttpEmbedProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_batch == 0) throw ArgumentError("max_batch must be positive");
  httplib::Client cli(cfg_.url);
  cli.set_connection_timeout(cfg_.timeout_s);
  cli.set_read_timeout(cfg_.timeout_s);
  auto res = cli.Get("/info");
  if (!res) throw ProviderError("GET " + cfg_.url + "/info failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError("GET /info returned HTTP " + std::to_string(res->status));
  dim_ = parse_info_response(res->body);
}

std::vector<Embedding> HttpEmbedProvider::embed(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  httplib::Client cli(cfg_.url);
  cli.set_connection_timeout(cfg_.timeout_s);
  cli.set_read_timeout(cfg_.timeout_s);
  for (std::size_t start = 0; start < texts.size(); start += cfg_.max_batch) {
    const std::size_t n = std::min(cfg_.max_batch, texts.size() - start);
    json req{{"model", cfg_.model},
             {"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                texts.begin() + static_cast<std::ptrdiff_t>(start + n))}};
    auto res = cli.Post("/embed", req.dump(), "application/json");
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++requests_;
    }
    if (!res) throw ProviderError("POST " + cfg_.url + "/embed failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ProviderError("POST /embed returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    for (auto& v : parse_embed_response(res->body, n, dim_)) out.push_back({std::move(v), tag()});
  }
  return out;
}

}  // namespace lats::ts
