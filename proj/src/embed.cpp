#include "rag/embed.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include <httplib.h>
#include <json.hpp>

#include "rag/chunker.hpp"
#include "rag/errors.hpp"
#include "rag/url.hpp"

namespace rag {
namespace {

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> raw,
                               EmbeddingVector (*make)(std::vector<float>)) {
  if (raw.empty()) {
    throw Error(ErrorCode::InvalidParams, "empty vector");
  }
  double sum = 0.0;
  for (const auto v : raw) {
    sum += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sum);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidParams, "zero or non-finite vector cannot be normalized");
  }
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
  }
  return make(std::move(out));
}

}  // namespace

EmbeddingVector EmbeddingVector::normalize(std::span<const double> raw) {
  return normalize_impl<double>(raw, [](std::vector<float> v) { return EmbeddingVector(std::move(v)); });
}

EmbeddingVector EmbeddingVector::normalize(std::span<const float> raw) {
  return normalize_impl<float>(raw, [](std::vector<float> v) { return EmbeddingVector(std::move(v)); });
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
  double sum = 0.0;
  for (const auto v : values) {
    sum += static_cast<double>(v) * static_cast<double>(v);
  }
  if (values.empty() || !(std::abs(std::sqrt(sum) - 1.0) <= kNormTolerance)) {
    throw Error(ErrorCode::InvalidParams, "vector is not unit-norm");
  }
  return EmbeddingVector(std::move(values));
}

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  return dot(a.values(), b.values());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

EmbeddingVector reference_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) {
    throw Error(ErrorCode::InvalidParams, "dim must be >= 1");
  }
  // Sorted by token so accumulation order never depends on token order.
  std::map<std::string, std::size_t> term_freq;
  for (auto& token : tokenize(text)) {
    for (auto& c : token) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    ++term_freq[token];
  }
  if (term_freq.empty()) {
    throw Error(ErrorCode::EmptyText, "text has no tokens");
  }
  std::vector<double> buckets(dim, 0.0);
  for (const auto& [token, tf] : term_freq) {
    buckets[fnv1a64(token) % dim] += std::log1p(static_cast<double>(tf));
  }
  return EmbeddingVector::normalize(std::span<const double>(buckets));
}

EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec) {
  if (spec.id != kReferenceEmbedderId) {
    throw Error(ErrorCode::BackendUnavailable, "no endpoint configured for embedder '" + spec.id + "'");
  }
  return reference_embed(text, spec.dim);
}

EmbeddingVector Embedder::embed_text(std::string_view text) {
  const std::string owned(text);
  auto out = embed_batch(std::span<const std::string>(&owned, 1));
  return std::move(out.front());
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (count_tokens(texts[i]) == 0) {
      throw Error(ErrorCode::EmptyText, "text at index " + std::to_string(i) + " has no tokens", i);
    }
  }
  if (texts.empty()) {
    return {};
  }
  texts_embedded_ += texts.size();
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::BackendUnavailable, "embedder returned wrong number of vectors");
  }
  return out;
}

ReferenceEmbedder::ReferenceEmbedder(std::size_t dim)
    : Embedder(EmbedderSpec{std::string(kReferenceEmbedderId), dim}) {}

std::vector<EmbeddingVector> ReferenceEmbedder::do_embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    out.push_back(reference_embed(text, spec().dim));
  }
  return out;
}

HttpEmbedder::HttpEmbedder(EmbedderSpec spec, HttpEmbedderConfig config)
    : Embedder(std::move(spec)),
      config_(std::move(config)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  parse_http_url(config_.endpoint);
}

std::vector<EmbeddingVector> HttpEmbedder::do_embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const auto batch = std::max<std::size_t>(1, config_.batch_size);
  for (std::size_t i = 0; i < texts.size(); i += batch) {
    auto part = post_batch(texts.subspan(i, std::min(batch, texts.size() - i)));
    for (auto& v : part) {
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<EmbeddingVector> HttpEmbedder::post_batch(std::span<const std::string> texts) {
  const auto url = parse_http_url(config_.endpoint);
  nlohmann::json body{{"input", texts}, {"model", spec().id}};

  in_flight_.acquire();
  httplib::Result res;
  {
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    if (config_.bearer_token) {
      client.set_bearer_token_auth(*config_.bearer_token);
    }
    res = client.Post(url.path, body.dump(), "application/json");
  }
  in_flight_.release();

  if (!res) {
    throw Error(ErrorCode::BackendUnavailable,
                config_.endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable,
                config_.endpoint + ": HTTP " + std::to_string(res->status));
  }

  std::vector<EmbeddingVector> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    const auto& data = reply.at("data");
    if (!data.is_array() || data.size() != texts.size()) {
      throw Error(ErrorCode::BackendUnavailable, "embedding count does not match input");
    }
    for (const auto& item : data) {
      const auto raw = item.at("embedding").get<std::vector<float>>();
      if (raw.size() != spec().dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "endpoint returned dim " + std::to_string(raw.size()) + ", expected " +
                        std::to_string(spec().dim));
      }
      out.push_back(EmbeddingVector::normalize(std::span<const float>(raw)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("malformed embeddings reply: ") + e.what());
  }
  return out;
}

std::shared_ptr<Embedder> make_embedder(const EmbedderSpec& spec,
                                        const std::optional<std::string>& endpoint) {
  if (spec.id == kReferenceEmbedderId) {
    return std::make_shared<ReferenceEmbedder>(spec.dim);
  }
  if (!endpoint || endpoint->empty()) {
    throw Error(ErrorCode::BackendUnavailable,
                "embedder '" + spec.id + "' requires an embeddings endpoint");
  }
  HttpEmbedderConfig config;
  config.endpoint = *endpoint;
  return std::make_shared<HttpEmbedder>(spec, std::move(config));
}

}  // namespace rag
