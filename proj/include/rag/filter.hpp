#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rag/metadata.hpp"

namespace rag {

enum class FilterOp { Eq, Ne, Lt, Le, Gt, Ge, In };

struct FilterClause {
  std::string key;
  FilterOp op = FilterOp::Eq;
  std::vector<MetaValue> values;  // exactly one unless op == In

  bool operator==(const FilterClause&) const = default;
};

/// Conjunction of clauses; the empty predicate matches everything.
///
/// A clause is false when its key is absent or the stored value and the
/// operand have different types. Integers and floats compare as numbers;
/// strings compare bytewise; false < true.
struct FilterPredicate {
  std::vector<FilterClause> clauses;

  bool matches(const Metadata& metadata) const;

  bool operator==(const FilterPredicate&) const = default;
};

std::string_view to_string(FilterOp op);

/// JSON form: `[{"key": "year", "op": ">=", "value": 2020},
///              {"key": "region", "op": "in", "values": ["EU", "ASIA"]}]`.
/// An object `{"year": 2020, ...}` is accepted as shorthand for equality
/// clauses. Throws Error(InvalidFilter).
FilterPredicate filter_from_json(const nlohmann::json& json);
nlohmann::json filter_to_json(const FilterPredicate& filter);

}  // namespace rag
