#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "rag/errors.hpp"

namespace rag::binary {

// Little-endian encoding regardless of host byte order.

template <typename T>
  requires std::is_integral_v<T>
void put(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    if constexpr (sizeof(T) > 1) {
      u = static_cast<U>(u >> 8);
    }
  }
}

inline void put(std::string& out, float value) {
  put(out, std::bit_cast<std::uint32_t>(value));
}

/// Bounds-checked cursor; truncation raises CorruptStore with the byte
/// offset at which data ran out.
class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
    requires std::is_integral_v<T>
  T get() {
    require(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<U>(u | (static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float get_float() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string_view take(std::size_t n) {
    require(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::CorruptStore,
                  what_ + ": truncated at byte " + std::to_string(bytes_.size()) + " (needed " +
                      std::to_string(n) + " more at offset " + std::to_string(pos_) + ")",
                  bytes_.size());
    }
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& what() const noexcept { return what_; }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace rag::binary
