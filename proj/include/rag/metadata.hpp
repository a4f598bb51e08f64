#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

namespace rag {

/// Scalar metadata value. Integers and floats stay distinct so that a
/// manifest value of `2020` round-trips as an integer.
using MetaValue = std::variant<bool, std::int64_t, double, std::string>;

using Metadata = std::map<std::string, MetaValue>;

/// Converts a JSON scalar; returns nullopt for null, arrays and objects.
std::optional<MetaValue> meta_from_json(const nlohmann::json& value);
nlohmann::json meta_to_json(const MetaValue& value);

nlohmann::json metadata_to_json(const Metadata& metadata);
/// Throws Error(NonScalarMetadata) if any member is not a scalar.
Metadata metadata_from_json(const nlohmann::json& object);

bool is_numeric(const MetaValue& value);
std::string meta_to_display(const MetaValue& value);

}  // namespace rag
