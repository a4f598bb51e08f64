#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rag {

struct HnswParams {
  std::size_t M = 16;
  std::size_t ef_construction = 200;

  bool operator==(const HnswParams&) const = default;
};

/// Hierarchical navigable small-world graph over the rows of a row-major
/// float matrix owned elsewhere (the vector store). Distance is 1 - dot,
/// which is cosine distance for unit vectors.
///
/// Construction is sequential in row order with levels drawn from a
/// splitmix64 stream seeded by `seed`, so a given (data, params, seed)
/// always yields the same graph, including after a save/load/extend cycle.
class HnswIndex {
 public:
  using Accept = std::function<bool(std::uint32_t)>;

  HnswIndex() = default;
  HnswIndex(std::size_t dim, HnswParams params, std::uint64_t seed);

  /// Inserts rows [size(), count) of `data`.
  void extend(std::span<const float> data, std::size_t count);

  /// Returns up to k (distance, row) pairs in ascending distance, ties by
  /// ascending row. With `accept`, rejected rows are still traversed but
  /// never returned, and the layer-0 search keeps expanding until it holds
  /// max(ef, k) accepted rows or runs out of reachable nodes.
  std::vector<std::pair<float, std::uint32_t>> search(std::span<const float> data,
                                                      std::span<const float> query, std::size_t k,
                                                      std::size_t ef,
                                                      const Accept& accept = {}) const;

  std::size_t size() const noexcept { return levels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const HnswParams& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::string serialize() const;
  /// Throws Error(CorruptStore) / Error(IncompatibleVersion).
  static HnswIndex deserialize(std::string_view bytes);

  bool operator==(const HnswIndex& other) const;

 private:
  using Neighbors = std::vector<std::uint32_t>;
  struct Candidate {
    float distance;
    std::uint32_t id;
  };

  float distance(std::span<const float> data, std::uint32_t row, std::span<const float> query) const;
  std::uint32_t greedy_descend(std::span<const float> data, std::span<const float> query,
                               std::uint32_t entry, int from_level, int to_level) const;
  std::vector<Candidate> search_layer(std::span<const float> data, std::span<const float> query,
                                      const std::vector<Candidate>& entries, std::size_t ef,
                                      int level, const Accept& accept) const;
  std::vector<std::uint32_t> select_neighbors(std::span<const float> data,
                                              std::vector<Candidate> candidates,
                                              std::size_t max_count) const;
  void insert(std::span<const float> data, std::uint32_t row);
  std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }
  int draw_level();

  std::size_t dim_ = 0;
  HnswParams params_;
  std::uint64_t seed_ = 0;
  std::uint64_t rng_state_ = 0;
  std::vector<int> levels_;
  std::vector<std::vector<Neighbors>> links_;  // [row][level]
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

}  // namespace rag
