#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rag {

inline constexpr std::string_view kReferenceEmbedderId = "ref-tfidf-v1";
inline constexpr std::size_t kDefaultEmbeddingDim = 512;

struct EmbedderSpec {
  std::string id{kReferenceEmbedderId};
  std::size_t dim = kDefaultEmbeddingDim;

  bool operator==(const EmbedderSpec&) const = default;
};

/// Unit-norm float vector. The only ways in are `normalize` (scales any
/// nonzero vector) and `from_unit` (accepts values already normalized).
class EmbeddingVector {
 public:
  static constexpr double kNormTolerance = 1e-5;

  /// Throws Error(InvalidParams) for an empty, zero or non-finite vector.
  static EmbeddingVector normalize(std::span<const double> raw);
  static EmbeddingVector normalize(std::span<const float> raw);
  /// Throws Error(InvalidParams) if |norm - 1| > kNormTolerance.
  static EmbeddingVector from_unit(std::vector<float> values);

  std::span<const float> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}
  std::vector<float> values_;
};

/// Cosine similarity of unit vectors, i.e. their dot product accumulated in
/// double. Throws Error(DimensionMismatch).
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double dot(std::span<const float> a, std::span<const float> b);

std::uint64_t fnv1a64(std::string_view bytes);

/// The in-tree lexical embedder: lowercased tokens hashed into `dim`
/// buckets, each distinct token adding ln(1 + tf). Throws Error(EmptyText).
EmbeddingVector reference_embed(std::string_view text, std::size_t dim);

/// Embeds with the reference embedder when `spec.id` names it; any other id
/// needs an endpoint and throws Error(BackendUnavailable).
EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec);

class Embedder {
 public:
  virtual ~Embedder() = default;
  Embedder(const Embedder&) = delete;
  Embedder& operator=(const Embedder&) = delete;

  const EmbedderSpec& spec() const noexcept { return spec_; }

  EmbeddingVector embed_text(std::string_view text);
  /// Throws Error(EmptyText) with position() set to the offending index.
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

  /// Number of texts embedded over this instance's lifetime.
  std::uint64_t texts_embedded() const noexcept { return texts_embedded_.load(); }

 protected:
  explicit Embedder(EmbedderSpec spec) : spec_(std::move(spec)) {}
  virtual std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) = 0;

 private:
  EmbedderSpec spec_;
  std::atomic<std::uint64_t> texts_embedded_{0};
};

class ReferenceEmbedder final : public Embedder {
 public:
  explicit ReferenceEmbedder(std::size_t dim = kDefaultEmbeddingDim);

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;
};

struct HttpEmbedderConfig {
  std::string endpoint;  // full URL of the embeddings route
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 64;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::string> bearer_token;
};

/// Adapter for an external embeddings endpoint speaking
/// `{"input": [...], "model": id}` -> `{"data": [{"embedding": [...]}, ...]}`.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(EmbedderSpec spec, HttpEmbedderConfig config);

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

 private:
  std::vector<EmbeddingVector> post_batch(std::span<const std::string> texts);

  HttpEmbedderConfig config_;
  std::counting_semaphore<> in_flight_;
};

/// Reference spec -> ReferenceEmbedder; anything else -> HttpEmbedder on
/// `endpoint` (Error(BackendUnavailable) when there is none).
std::shared_ptr<Embedder> make_embedder(const EmbedderSpec& spec,
                                        const std::optional<std::string>& endpoint = std::nullopt);

}  // namespace rag
