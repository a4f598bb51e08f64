#include "rag/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rag/binary_io.hpp"
#include "rag/errors.hpp"

namespace rag {
namespace {

constexpr char kMagic[4] = {'V', 'R', 'G', 'H'};
constexpr std::uint32_t kVersion = 1;
constexpr int kMaxLevel = 32;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

HnswIndex::HnswIndex(std::size_t dim, HnswParams params, std::uint64_t seed)
    : dim_(dim), params_(params), seed_(seed), rng_state_(seed) {
  if (dim == 0 || params.M < 2 || params.ef_construction < 1) {
    throw Error(ErrorCode::InvalidParams, "HNSW needs dim >= 1, M >= 2, ef_construction >= 1");
  }
}

float HnswIndex::distance(std::span<const float> data, std::uint32_t row,
                          std::span<const float> query) const {
  const float* v = data.data() + static_cast<std::size_t>(row) * dim_;
  float sum = 0.0F;
  for (std::size_t i = 0; i < dim_; ++i) {
    sum += v[i] * query[i];
  }
  return 1.0F - sum;
}

int HnswIndex::draw_level() {
  const double u = static_cast<double>((splitmix64(rng_state_) >> 11) + 1) * 0x1.0p-53;
  const double ml = 1.0 / std::log(static_cast<double>(params_.M));
  return std::min(kMaxLevel, static_cast<int>(std::floor(-std::log(u) * ml)));
}

std::uint32_t HnswIndex::greedy_descend(std::span<const float> data, std::span<const float> query,
                                        std::uint32_t entry, int from_level, int to_level) const {
  std::uint32_t current = entry;
  float current_dist = distance(data, current, query);
  for (int level = from_level; level >= to_level; --level) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto n : links_[current][static_cast<std::size_t>(level)]) {
        const float d = distance(data, n, query);
        if (d < current_dist || (d == current_dist && n < current)) {
          current = n;
          current_dist = d;
          changed = true;
        }
      }
    }
  }
  return current;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const float> data,
                                                          std::span<const float> query,
                                                          const std::vector<Candidate>& entries,
                                                          std::size_t ef, int level,
                                                          const Accept& accept) const {
  const auto closer = [](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  const auto farther = [&](const Candidate& a, const Candidate& b) { return closer(b, a); };
  // frontier: nearest on top; results: farthest on top.
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(farther)> frontier(farther);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(closer)> results(closer);
  std::vector<bool> visited(size(), false);

  for (const auto& e : entries) {
    if (visited[e.id]) {
      continue;
    }
    visited[e.id] = true;
    frontier.push(e);
    if (!accept || accept(e.id)) {
      results.push(e);
      if (results.size() > ef) {
        results.pop();
      }
    }
  }

  while (!frontier.empty()) {
    const auto current = frontier.top();
    if (results.size() >= ef && closer(results.top(), current)) {
      break;
    }
    frontier.pop();
    for (const auto n : links_[current.id][static_cast<std::size_t>(level)]) {
      if (visited[n]) {
        continue;
      }
      visited[n] = true;
      const Candidate c{distance(data, n, query), n};
      if (results.size() < ef || closer(c, results.top())) {
        frontier.push(c);
        if (!accept || accept(n)) {
          results.push(c);
          if (results.size() > ef) {
            results.pop();
          }
        }
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(std::span<const float> data,
                                                       std::vector<Candidate> candidates,
                                                       std::size_t max_count) const {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  });
  std::vector<std::uint32_t> selected;
  std::vector<std::uint32_t> pruned;
  for (const auto& c : candidates) {
    if (selected.size() >= max_count) {
      break;
    }
    const auto c_vec = data.subspan(static_cast<std::size_t>(c.id) * dim_, dim_);
    const bool diverse = std::none_of(selected.begin(), selected.end(), [&](std::uint32_t s) {
      return distance(data, s, c_vec) < c.distance;
    });
    if (diverse) {
      selected.push_back(c.id);
    } else {
      pruned.push_back(c.id);
    }
  }
  // Backfill with the nearest pruned candidates so degree stays at max_count.
  for (std::size_t i = 0; i < pruned.size() && selected.size() < max_count; ++i) {
    selected.push_back(pruned[i]);
  }
  return selected;
}

void HnswIndex::insert(std::span<const float> data, std::uint32_t row) {
  const int level = draw_level();
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);
  if (max_level_ < 0) {
    entry_ = row;
    max_level_ = level;
    return;
  }

  const auto query = data.subspan(static_cast<std::size_t>(row) * dim_, dim_);
  std::uint32_t entry = entry_;
  if (max_level_ > level) {
    entry = greedy_descend(data, query, entry, max_level_, level + 1);
  }
  std::vector<Candidate> entries{{distance(data, entry, query), entry}};

  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto found = search_layer(data, query, entries, params_.ef_construction, lc, {});
    auto selected = select_neighbors(data, found, params_.M);
    const auto lvl = static_cast<std::size_t>(lc);
    for (const auto n : selected) {
      auto& back = links_[n][lvl];
      back.push_back(row);
      if (back.size() > max_links(lc)) {
        const auto n_vec = data.subspan(static_cast<std::size_t>(n) * dim_, dim_);
        std::vector<Candidate> pool;
        pool.reserve(back.size());
        for (const auto b : back) {
          pool.push_back({distance(data, b, n_vec), b});
        }
        back = select_neighbors(data, std::move(pool), max_links(lc));
      }
    }
    links_[row][lvl] = std::move(selected);
    entries = std::move(found);
  }

  if (level > max_level_) {
    max_level_ = level;
    entry_ = row;
  }
}

void HnswIndex::extend(std::span<const float> data, std::size_t count) {
  if (data.size() < count * dim_) {
    throw Error(ErrorCode::LengthMismatch, "HNSW data shorter than count * dim");
  }
  for (auto row = size(); row < count; ++row) {
    insert(data, static_cast<std::uint32_t>(row));
  }
}

std::vector<std::pair<float, std::uint32_t>> HnswIndex::search(std::span<const float> data,
                                                               std::span<const float> query,
                                                               std::size_t k, std::size_t ef,
                                                               const Accept& accept) const {
  std::vector<std::pair<float, std::uint32_t>> out;
  if (size() == 0 || k == 0) {
    return out;
  }
  const auto entry = greedy_descend(data, query, entry_, max_level_, 1);
  const auto found =
      search_layer(data, query, {{distance(data, entry, query), entry}}, std::max(ef, k), 0, accept);
  for (const auto& c : found) {
    if (out.size() == k) {
      break;
    }
    out.emplace_back(c.distance, c.id);
  }
  return out;
}

std::string HnswIndex::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  binary::put(out, kVersion);
  binary::put(out, static_cast<std::uint32_t>(dim_));
  binary::put(out, static_cast<std::uint32_t>(params_.M));
  binary::put(out, static_cast<std::uint32_t>(params_.ef_construction));
  binary::put(out, seed_);
  binary::put(out, rng_state_);
  binary::put(out, static_cast<std::uint64_t>(size()));
  binary::put(out, static_cast<std::int32_t>(max_level_));
  binary::put(out, entry_);
  for (std::size_t row = 0; row < size(); ++row) {
    binary::put(out, static_cast<std::int32_t>(levels_[row]));
    for (const auto& neighbors : links_[row]) {
      binary::put(out, static_cast<std::uint32_t>(neighbors.size()));
      for (const auto n : neighbors) {
        binary::put(out, n);
      }
    }
  }
  return out;
}

HnswIndex HnswIndex::deserialize(std::string_view bytes) {
  binary::Reader in(bytes, "ann.idx");
  if (in.take(4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::CorruptStore, "ann.idx: bad magic at byte 0", 0);
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::IncompatibleVersion, "ann.idx version " + std::to_string(version));
  }
  HnswIndex index;
  index.dim_ = in.get<std::uint32_t>();
  index.params_.M = in.get<std::uint32_t>();
  index.params_.ef_construction = in.get<std::uint32_t>();
  index.seed_ = in.get<std::uint64_t>();
  index.rng_state_ = in.get<std::uint64_t>();
  const auto count = in.get<std::uint64_t>();
  index.max_level_ = in.get<std::int32_t>();
  index.entry_ = in.get<std::uint32_t>();
  const auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::CorruptStore, "ann.idx: " + why + " at byte " + std::to_string(in.offset()),
                 in.offset());
  };
  if (index.dim_ == 0 || index.params_.M < 2 || count > in.remaining() / 8 + 1 ||
      (count == 0) != (index.max_level_ < 0) || (count > 0 && index.entry_ >= count)) {
    throw corrupt("inconsistent header");
  }
  index.levels_.reserve(count);
  index.links_.reserve(count);
  for (std::uint64_t row = 0; row < count; ++row) {
    const auto level = in.get<std::int32_t>();
    if (level < 0 || level > kMaxLevel || level > index.max_level_) {
      throw corrupt("bad level");
    }
    index.levels_.push_back(level);
    auto& per_level = index.links_.emplace_back(static_cast<std::size_t>(level) + 1);
    for (auto& neighbors : per_level) {
      const auto n = in.get<std::uint32_t>();
      in.require(static_cast<std::size_t>(n) * 4);
      neighbors.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto id = in.get<std::uint32_t>();
        if (id >= count) {
          throw corrupt("neighbor id out of range");
        }
        neighbors.push_back(id);
      }
    }
  }
  if (count > 0 && index.levels_[index.entry_] != index.max_level_) {
    throw corrupt("entry point level mismatch");
  }
  for (std::size_t row = 0; row < index.links_.size(); ++row) {
    for (std::size_t lvl = 0; lvl < index.links_[row].size(); ++lvl) {
      for (const auto n : index.links_[row][lvl]) {
        if (index.links_[n].size() <= lvl) {
          throw corrupt("link to node absent from level");
        }
      }
    }
  }
  if (in.remaining() != 0) {
    throw corrupt("trailing bytes");
  }
  return index;
}

bool HnswIndex::operator==(const HnswIndex& other) const {
  return dim_ == other.dim_ && params_ == other.params_ && seed_ == other.seed_ &&
         rng_state_ == other.rng_state_ && levels_ == other.levels_ && links_ == other.links_ &&
         entry_ == other.entry_ && max_level_ == other.max_level_;
}

}  // namespace rag
