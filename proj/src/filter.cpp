#include "rag/filter.hpp"

#include <compare>
#include <optional>

#include "rag/errors.hpp"

namespace rag {
namespace {

// nullopt when the two values are of incomparable types.
std::optional<std::partial_ordering> compare(const MetaValue& lhs, const MetaValue& rhs) {
  if (is_numeric(lhs) && is_numeric(rhs)) {
    if (std::holds_alternative<std::int64_t>(lhs) && std::holds_alternative<std::int64_t>(rhs)) {
      return std::get<std::int64_t>(lhs) <=> std::get<std::int64_t>(rhs);
    }
    const auto as_double = [](const MetaValue& v) {
      if (const auto* i = std::get_if<std::int64_t>(&v)) {
        return static_cast<double>(*i);
      }
      return std::get<double>(v);
    };
    return as_double(lhs) <=> as_double(rhs);
  }
  if (lhs.index() != rhs.index()) {
    return std::nullopt;
  }
  if (const auto* s = std::get_if<std::string>(&lhs)) {
    return *s <=> std::get<std::string>(rhs);
  }
  return std::get<bool>(lhs) <=> std::get<bool>(rhs);
}

bool clause_matches(const FilterClause& clause, const MetaValue& value) {
  if (clause.op == FilterOp::In) {
    for (const auto& candidate : clause.values) {
      const auto cmp = compare(value, candidate);
      if (cmp && *cmp == 0) {
        return true;
      }
    }
    return false;
  }
  const auto cmp = compare(value, clause.values.front());
  if (!cmp || *cmp == std::partial_ordering::unordered) {
    return false;
  }
  switch (clause.op) {
    case FilterOp::Eq: return *cmp == 0;
    case FilterOp::Ne: return *cmp != 0;
    case FilterOp::Lt: return *cmp < 0;
    case FilterOp::Le: return *cmp <= 0;
    case FilterOp::Gt: return *cmp > 0;
    case FilterOp::Ge: return *cmp >= 0;
    case FilterOp::In: break;
  }
  return false;
}

FilterOp parse_op(const std::string& op) {
  if (op == "==" || op == "=") return FilterOp::Eq;
  if (op == "!=") return FilterOp::Ne;
  if (op == "<") return FilterOp::Lt;
  if (op == "<=") return FilterOp::Le;
  if (op == ">") return FilterOp::Gt;
  if (op == ">=") return FilterOp::Ge;
  if (op == "in") return FilterOp::In;
  throw Error(ErrorCode::InvalidFilter, "unknown operator '" + op + "'");
}

MetaValue scalar_or_throw(const nlohmann::json& value, const std::string& key) {
  auto scalar = meta_from_json(value);
  if (!scalar) {
    throw Error(ErrorCode::InvalidFilter, "operand for '" + key + "' must be a scalar");
  }
  return std::move(*scalar);
}

}  // namespace

bool FilterPredicate::matches(const Metadata& metadata) const {
  for (const auto& clause : clauses) {
    const auto it = metadata.find(clause.key);
    if (it == metadata.end() || !clause_matches(clause, it->second)) {
      return false;
    }
  }
  return true;
}

std::string_view to_string(FilterOp op) {
  switch (op) {
    case FilterOp::Eq: return "==";
    case FilterOp::Ne: return "!=";
    case FilterOp::Lt: return "<";
    case FilterOp::Le: return "<=";
    case FilterOp::Gt: return ">";
    case FilterOp::Ge: return ">=";
    case FilterOp::In: return "in";
  }
  return "?";
}

FilterPredicate filter_from_json(const nlohmann::json& json) {
  FilterPredicate out;
  if (json.is_null()) {
    return out;
  }
  if (json.is_object()) {
    for (const auto& [key, value] : json.items()) {
      out.clauses.push_back({key, FilterOp::Eq, {scalar_or_throw(value, key)}});
    }
    return out;
  }
  if (!json.is_array()) {
    throw Error(ErrorCode::InvalidFilter, "filter must be an array of clauses or an object");
  }
  for (const auto& item : json) {
    if (!item.is_object() || !item.contains("key") || !item["key"].is_string() ||
        !item.contains("op") || !item["op"].is_string()) {
      throw Error(ErrorCode::InvalidFilter, "clause needs string 'key' and 'op': " + item.dump());
    }
    FilterClause clause;
    clause.key = item["key"].get<std::string>();
    if (clause.key.empty()) {
      throw Error(ErrorCode::InvalidFilter, "empty key");
    }
    clause.op = parse_op(item["op"].get<std::string>());
    if (clause.op == FilterOp::In) {
      const auto values = item.find("values");
      if (values == item.end() || !values->is_array()) {
        throw Error(ErrorCode::InvalidFilter, "'in' clause on '" + clause.key + "' needs 'values' array");
      }
      for (const auto& v : *values) {
        clause.values.push_back(scalar_or_throw(v, clause.key));
      }
    } else {
      const auto value = item.find("value");
      if (value == item.end()) {
        throw Error(ErrorCode::InvalidFilter, "clause on '" + clause.key + "' needs 'value'");
      }
      clause.values.push_back(scalar_or_throw(*value, clause.key));
    }
    out.clauses.push_back(std::move(clause));
  }
  return out;
}

nlohmann::json filter_to_json(const FilterPredicate& filter) {
  auto out = nlohmann::json::array();
  for (const auto& clause : filter.clauses) {
    nlohmann::json item{{"key", clause.key}, {"op", to_string(clause.op)}};
    if (clause.op == FilterOp::In) {
      auto values = nlohmann::json::array();
      for (const auto& v : clause.values) {
        values.push_back(meta_to_json(v));
      }
      item["values"] = std::move(values);
    } else {
      item["value"] = meta_to_json(clause.values.front());
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace rag
