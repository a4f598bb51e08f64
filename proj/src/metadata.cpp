#include "rag/metadata.hpp"

#include <limits>

#include "rag/errors.hpp"

namespace rag {

std::optional<MetaValue> meta_from_json(const nlohmann::json& value) {
  switch (value.type()) {
    case nlohmann::json::value_t::boolean:
      return MetaValue{value.get<bool>()};
    case nlohmann::json::value_t::number_integer:
      return MetaValue{value.get<std::int64_t>()};
    case nlohmann::json::value_t::number_unsigned: {
      auto u = value.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        return MetaValue{static_cast<std::int64_t>(u)};
      }
      return MetaValue{static_cast<double>(u)};
    }
    case nlohmann::json::value_t::number_float:
      return MetaValue{value.get<double>()};
    case nlohmann::json::value_t::string:
      return MetaValue{value.get<std::string>()};
    default:
      return std::nullopt;
  }
}

nlohmann::json meta_to_json(const MetaValue& value) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

nlohmann::json metadata_to_json(const Metadata& metadata) {
  auto out = nlohmann::json::object();
  for (const auto& [key, value] : metadata) {
    out[key] = meta_to_json(value);
  }
  return out;
}

Metadata metadata_from_json(const nlohmann::json& object) {
  Metadata out;
  if (!object.is_object()) {
    throw Error(ErrorCode::NonScalarMetadata, "metadata must be a JSON object");
  }
  for (const auto& [key, value] : object.items()) {
    auto scalar = meta_from_json(value);
    if (!scalar) {
      throw Error(ErrorCode::NonScalarMetadata, "key '" + key + "' is not a scalar");
    }
    out.emplace(key, std::move(*scalar));
  }
  return out;
}

bool is_numeric(const MetaValue& value) {
  return std::holds_alternative<std::int64_t>(value) || std::holds_alternative<double>(value);
}

std::string meta_to_display(const MetaValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) {
    return *s;
  }
  return meta_to_json(value).dump();
}

}  // namespace rag
