#include "maas/embedding.hpp"

#include <cctype>
#include <cmath>

#include "maas/error.hpp"
#include "maas/rng.hpp"

namespace maas {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void l2_normalize(std::span<double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(Errc::DimensionMismatch, "embedding dimension must be positive");
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
  EmbeddingVector out{std::vector<double>(dim_, 0.0)};
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const double sign = (mix64(h) >> 63) ? -1.0 : 1.0;
    out.values[h % dim_] += sign;
  }
  l2_normalize(out.values);
  return out;
}

nlohmann::json HashingEmbedder::config() const { return {{"provider", "hashing"}, {"dimension", dim_}}; }

RemoteEmbedder::RemoteEmbedder(RemoteEmbeddingConfig config, BackendConfig backend,
                               std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), backend_(std::move(backend)), transport_(std::move(transport)) {}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  const nlohmann::json req = {{"model", config_.model}, {"input", std::string(text)}};
  std::string body;
  try {
    body = post_with_retry(*transport_, "/v1/embeddings", req.dump(), backend_.auth_headers(), backend_.retry);
  } catch (const Error& e) {
    throw Error(Errc::RemoteUnavailable, e.what());
  }
  EmbeddingVector out;
  try {
    const auto j = nlohmann::json::parse(body);
    out.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::RemoteUnavailable, std::string("malformed embeddings response: ") + e.what());
  }
  if (out.values.size() != config_.dimension)
    throw Error(Errc::DimensionMismatch, "remote embedding has dimension " + std::to_string(out.values.size()) +
                                             ", expected " + std::to_string(config_.dimension));
  for (double x : out.values)
    if (!std::isfinite(x)) throw Error(Errc::RemoteUnavailable, "remote embedding has non-finite entries");
  l2_normalize(out.values);
  return out;
}

nlohmann::json RemoteEmbedder::config() const {
  return {{"provider", "remote"}, {"model", config_.model}, {"dimension", config_.dimension}};
}

std::unique_ptr<EmbeddingProvider> make_embedder(const nlohmann::json& config, const BackendConfig& backend) {
  const auto provider = config.value("provider", std::string("hashing"));
  const auto dim = config.value("dimension", HashingEmbedder::kDefaultDim);
  if (provider == "hashing") return std::make_unique<HashingEmbedder>(dim);
  if (provider == "remote") {
    RemoteEmbeddingConfig rc{config.value("model", RemoteEmbeddingConfig{}.model), dim};
    return std::make_unique<RemoteEmbedder>(rc, backend, std::make_shared<HttplibTransport>(backend.base_url));
  }
  throw Error(Errc::InvalidConfig, "unknown embedding provider '" + provider + "'");
}

std::vector<double> layer_feature(std::span<const double> query, std::span<const std::vector<double>> layer_sums) {
  const std::size_t d = query.size();
  std::vector<double> out;
  out.reserve(d * (1 + layer_sums.size()));
  out.insert(out.end(), query.begin(), query.end());
  for (const auto& s : layer_sums) {
    if (s.size() != d)
      throw Error(Errc::DimensionMismatch,
                  "layer sum has dimension " + std::to_string(s.size()) + ", query has " + std::to_string(d));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace maas
