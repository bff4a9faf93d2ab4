#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maas/http_transport.hpp"

namespace maas {

// Fixed-dimension text embedding; either all zeros or unit L2 norm.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const noexcept = 0;
  // Serializable description, stored in checkpoints.
  virtual nlohmann::json config() const = 0;
};

// Lowercased ASCII alphanumeric runs. Bytes >= 0x80 count as token characters
// so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// Signed feature hashing: each token adds +/-1 to bucket fnv1a(token) % d,
// sign taken from the top bit of mix64(fnv1a(token)); the result is
// L2-normalized. Never fails.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit HashingEmbedder(std::size_t dim = kDefaultDim);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const noexcept override { return dim_; }
  nlohmann::json config() const override;

 private:
  std::size_t dim_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

struct RemoteEmbeddingConfig {
  std::string model = "all-MiniLM-L6-v2";
  std::size_t dimension = 384;
};

// OpenAI-compatible /v1/embeddings client. Throws Error(RemoteUnavailable).
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(RemoteEmbeddingConfig config, BackendConfig backend, std::shared_ptr<HttpTransport> transport);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const noexcept override { return config_.dimension; }
  nlohmann::json config() const override;

 private:
  RemoteEmbeddingConfig config_;
  BackendConfig backend_;
  std::shared_ptr<HttpTransport> transport_;
};

// Build a provider from its config() JSON. Remote providers get a transport
// from `backend`.
std::unique_ptr<EmbeddingProvider> make_embedder(const nlohmann::json& config, const BackendConfig& backend);

void l2_normalize(std::span<double> v);

// v(q) || sum(layer 1) || ... || sum(layer l-1). Sums are raw, not renormalized.
std::vector<double> layer_feature(std::span<const double> query, std::span<const std::vector<double>> layer_sums);

}  // namespace maas
