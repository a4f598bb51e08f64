#include "rag/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "rag/binary_io.hpp"
#include "rag/errors.hpp"

namespace rag {
namespace fs = std::filesystem;
namespace {

constexpr char kVectorsMagic[4] = {'V', 'R', 'A', 'G'};
constexpr std::size_t kVectorsHeaderSize = 20;

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::CorruptStore, "missing " + path.filename().string(), 0);
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Write-then-rename so a crash never leaves a half-written file in place.
void write_atomically(const fs::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorCode::IoError, "short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

Chunk chunk_from_json(const nlohmann::json& obj) {
  Chunk chunk;
  chunk.doc_id = obj.at("doc_id").get<std::string>();
  chunk.index = obj.at("chunk_index").get<std::size_t>();
  chunk.token_start = obj.at("token_start").get<std::size_t>();
  chunk.token_end = obj.at("token_end").get<std::size_t>();
  chunk.text = obj.at("text").get<std::string>();
  chunk.metadata = metadata_from_json(obj.at("metadata"));
  return chunk;
}

}  // namespace

bool hit_order(const RetrievalHit& a, const RetrievalHit& b) {
  return a.score > b.score || (a.score == b.score && a.record_id < b.record_id);
}

VectorStore::VectorStore(StoreMeta meta) : meta_(std::move(meta)) {
  if (meta_.dim < 1) {
    throw Error(ErrorCode::InvalidParams, "store dim must be >= 1");
  }
  if (meta_.embedder.dim != meta_.dim) {
    throw Error(ErrorCode::InvalidParams, "embedder dim differs from store dim");
  }
  if (meta_.embedder.id.empty()) {
    throw Error(ErrorCode::InvalidParams, "embedder id must be nonempty");
  }
  validate(meta_.chunk_params);
  if (meta_.count != 0) {
    throw Error(ErrorCode::InvalidParams, "a new store starts with count 0");
  }
}

void VectorStore::check_dim(const EmbeddingVector& query) const {
  if (query.dim() != meta_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                                  ", store dim " + std::to_string(meta_.dim));
  }
}

std::vector<std::uint64_t> VectorStore::insert(std::span<const Chunk> chunks,
                                               std::span<const EmbeddingVector> vectors) {
  if (chunks.size() != vectors.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(chunks.size()) + " chunks, " +
                                               std::to_string(vectors.size()) + " vectors");
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != meta_.dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "vector " + std::to_string(i) + " has dim " + std::to_string(vectors[i].dim()), i);
    }
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(chunks.size());
  data_.reserve(data_.size() + vectors.size() * meta_.dim);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    ids.push_back(chunks_.size());
    chunks_.push_back(chunks[i]);
    const auto v = vectors[i].values();
    data_.insert(data_.end(), v.begin(), v.end());
  }
  meta_.count = chunks_.size();
  return ids;
}

RetrievalHit VectorStore::make_hit(std::uint64_t record_id, double score) const {
  return RetrievalHit{record_id, score, chunks_[record_id]};
}

std::vector<RetrievalHit> VectorStore::search_flat(const EmbeddingVector& query, std::size_t k,
                                                   const std::optional<FilterPredicate>& filter) const {
  check_dim(query);
  if (k == 0) {
    throw Error(ErrorCode::InvalidParams, "k must be >= 1");
  }
  std::vector<std::pair<double, std::uint64_t>> scored;
  scored.reserve(size());
  const auto q = query.values();
  for (std::uint64_t id = 0; id < size(); ++id) {
    if (filter && !filter->matches(chunks_[id].metadata)) {
      continue;
    }
    scored.emplace_back(dot(vector(id), q), id);
  }
  const auto by_rank = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  const auto keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    by_rank);
  std::vector<RetrievalHit> hits;
  hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    hits.push_back(make_hit(scored[i].second, scored[i].first));
  }
  return hits;
}

void VectorStore::build_ann_index(HnswParams params) {
  if (size() == 0) {
    throw Error(ErrorCode::EmptyStore, "cannot index an empty store");
  }
  HnswIndex index(meta_.dim, params, meta_.ann_seed);
  index.extend(data_, size());
  ann_ = std::move(index);
}

std::vector<RetrievalHit> VectorStore::search_ann(const EmbeddingVector& query, std::size_t k,
                                                  std::size_t ef_search,
                                                  const std::optional<FilterPredicate>& filter) const {
  check_dim(query);
  if (ann_stale()) {
    throw Error(ErrorCode::StaleIndex, ann_ ? "index predates the latest insert" : "no index built");
  }
  if (k == 0) {
    throw Error(ErrorCode::InvalidParams, "k must be >= 1");
  }
  if (k >= size()) {
    // Every record is wanted; the exact scan is the same answer.
    return search_flat(query, k, filter);
  }
  HnswIndex::Accept accept;
  if (filter) {
    accept = [&](std::uint32_t id) { return filter->matches(chunks_[id].metadata); };
  }
  const auto found = ann_->search(data_, query.values(), k, ef_search, accept);
  std::vector<RetrievalHit> hits;
  hits.reserve(found.size());
  for (const auto& [distance, id] : found) {
    hits.push_back(make_hit(id, dot(vector(id), query.values())));
  }
  std::sort(hits.begin(), hits.end(), hit_order);
  return hits;
}

const Chunk& VectorStore::chunk(std::uint64_t record_id) const {
  return chunks_.at(record_id);
}

std::span<const float> VectorStore::vector(std::uint64_t record_id) const {
  return std::span<const float>(data_).subspan(record_id * meta_.dim, meta_.dim);
}

ChunkRecord VectorStore::record(std::uint64_t record_id) const {
  const auto v = vector(record_id);
  return ChunkRecord{record_id, chunk(record_id),
                     EmbeddingVector::from_unit(std::vector<float>(v.begin(), v.end()))};
}

std::string encode_vectors_file(std::size_t dim, std::span<const float> data) {
  std::string out(kVectorsMagic, sizeof(kVectorsMagic));
  out.reserve(kVectorsHeaderSize + data.size() * 4);
  binary::put(out, VectorStore::kFormatVersion);
  binary::put(out, static_cast<std::uint32_t>(dim));
  binary::put(out, static_cast<std::uint64_t>(dim == 0 ? 0 : data.size() / dim));
  for (const float v : data) {
    binary::put(out, v);
  }
  return out;
}

nlohmann::json chunk_to_json(std::uint64_t record_id, const Chunk& chunk) {
  return {{"record_id", record_id},
          {"doc_id", chunk.doc_id},
          {"chunk_index", chunk.index},
          {"token_start", chunk.token_start},
          {"token_end", chunk.token_end},
          {"text", chunk.text},
          {"metadata", metadata_to_json(chunk.metadata)}};
}

void VectorStore::save(const fs::path& directory) const {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create " + directory.string() + ": " + ec.message());
  }

  nlohmann::json meta{{"format_version", kFormatVersion},
                      {"dim", meta_.dim},
                      {"embedder_id", meta_.embedder.id},
                      {"chunk_size", meta_.chunk_params.chunk_size},
                      {"overlap", meta_.chunk_params.overlap},
                      {"count", meta_.count},
                      {"ann_seed", meta_.ann_seed}};

  std::string chunks;
  for (std::uint64_t id = 0; id < size(); ++id) {
    chunks += chunk_to_json(id, chunks_[id]).dump();
    chunks += '\n';
  }

  write_atomically(directory / "vectors.bin", encode_vectors_file(meta_.dim, data_));
  write_atomically(directory / "chunks.jsonl", chunks);
  if (ann_ && !ann_stale()) {
    write_atomically(directory / "ann.idx", ann_->serialize());
  } else {
    fs::remove(directory / "ann.idx", ec);
  }
  // meta.json last: its presence marks a complete store.
  write_atomically(directory / "meta.json", meta.dump(2) + "\n");
}

VectorStore VectorStore::load(const fs::path& directory) {
  if (!fs::is_directory(directory)) {
    throw Error(ErrorCode::IoError, "no store directory at " + directory.string());
  }

  StoreMeta meta;
  {
    const auto text = read_all(directory / "meta.json");
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::CorruptStore, std::string("meta.json: ") + e.what(), e.byte);
    }
    try {
      const auto version = obj.at("format_version").get<std::uint32_t>();
      if (version != kFormatVersion) {
        throw Error(ErrorCode::IncompatibleVersion, "meta.json format_version " + std::to_string(version));
      }
      meta.dim = obj.at("dim").get<std::size_t>();
      meta.embedder = EmbedderSpec{obj.at("embedder_id").get<std::string>(), meta.dim};
      meta.chunk_params = ChunkParams{obj.at("chunk_size").get<std::size_t>(),
                                      obj.at("overlap").get<std::size_t>()};
      meta.count = obj.at("count").get<std::size_t>();
      meta.ann_seed = obj.at("ann_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptStore, std::string("meta.json: ") + e.what(), 0);
    }
  }
  const auto count = meta.count;
  meta.count = 0;
  VectorStore store = [&] {
    try {
      return VectorStore(meta);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptStore, std::string("meta.json: ") + e.what(), 0);
    }
  }();

  {
    const auto bytes = read_all(directory / "vectors.bin");
    binary::Reader in(bytes, "vectors.bin");
    if (in.take(4) != std::string_view(kVectorsMagic, 4)) {
      throw Error(ErrorCode::CorruptStore, "vectors.bin: bad magic at byte 0", 0);
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw Error(ErrorCode::IncompatibleVersion, "vectors.bin version " + std::to_string(version));
    }
    const auto dim = in.get<std::uint32_t>();
    if (dim != meta.dim) {
      throw Error(ErrorCode::CorruptStore, "vectors.bin: dim " + std::to_string(dim) +
                                               " disagrees with meta.json at byte 8", 8);
    }
    const auto n = in.get<std::uint64_t>();
    if (n != count) {
      throw Error(ErrorCode::CorruptStore, "vectors.bin: count " + std::to_string(n) +
                                               " disagrees with meta.json at byte 12", 12);
    }
    if (n > in.remaining() / (4 * static_cast<std::uint64_t>(dim))) {
      throw Error(ErrorCode::CorruptStore,
                  "vectors.bin: truncated at byte " + std::to_string(bytes.size()), bytes.size());
    }
    const auto floats = static_cast<std::size_t>(n) * dim;
    store.data_.resize(floats);
    for (std::size_t i = 0; i < floats; ++i) {
      store.data_[i] = in.get_float();
    }
    if (in.remaining() != 0) {
      throw Error(ErrorCode::CorruptStore,
                  "vectors.bin: trailing bytes at byte " + std::to_string(in.offset()), in.offset());
    }
    for (std::size_t row = 0; row < n; ++row) {
      const std::span<const float> v(store.data_.data() + row * dim, dim);
      const double norm = std::sqrt(dot(v, v));
      if (!(std::abs(norm - 1.0) <= EmbeddingVector::kNormTolerance)) {
        const auto offset = kVectorsHeaderSize + row * dim * 4;
        throw Error(ErrorCode::CorruptStore,
                    "vectors.bin: record " + std::to_string(row) + " is not unit-norm at byte " +
                        std::to_string(offset),
                    offset);
      }
    }
  }

  {
    const auto text = read_all(directory / "chunks.jsonl");
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string::npos) {
        end = text.size();
      }
      const auto line = std::string_view(text).substr(pos, end - pos);
      const auto id = store.chunks_.size();
      try {
        const auto obj = nlohmann::json::parse(line);
        if (obj.at("record_id").get<std::uint64_t>() != id) {
          throw Error(ErrorCode::CorruptStore, "record_id out of sequence", pos);
        }
        store.chunks_.push_back(chunk_from_json(obj));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptStore,
                    "chunks.jsonl: record " + std::to_string(id) + " at byte " + std::to_string(pos) +
                        ": " + e.what(),
                    pos);
      } catch (const Error& e) {
        throw Error(ErrorCode::CorruptStore,
                    "chunks.jsonl: record " + std::to_string(id) + " at byte " + std::to_string(pos) +
                        ": " + e.what(),
                    pos);
      }
      pos = end + 1;
    }
    if (store.chunks_.size() != count) {
      throw Error(ErrorCode::CorruptStore,
                  "chunks.jsonl: " + std::to_string(store.chunks_.size()) + " records, expected " +
                      std::to_string(count) + " (ends at byte " + std::to_string(text.size()) + ")",
                  text.size());
    }
  }
  store.meta_.count = count;

  const auto ann_path = directory / "ann.idx";
  if (fs::exists(ann_path)) {
    auto index = HnswIndex::deserialize(read_all(ann_path));
    if (index.size() != count || index.dim() != meta.dim || index.seed() != meta.ann_seed) {
      throw Error(ErrorCode::CorruptStore, "ann.idx does not match the store", 0);
    }
    store.ann_ = std::move(index);
  }
  return store;
}

}  // namespace rag
