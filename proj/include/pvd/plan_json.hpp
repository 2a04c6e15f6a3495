#pragma once

#include <filesystem>

#include "json.hpp"
#include "pvd/plan.hpp"

namespace pvd {

using Json = nlohmann::ordered_json;

inline constexpr int kSpecVersion = 1;

Json value_to_json(const Value& v);
/// JSON integers map to int64, other numbers to float64.
Value value_from_json(const Json& j);

Json binding_to_json(const Binding& b);
Binding binding_from_json(const Json& j);

Json schema_to_json(const Schema& s);
Schema schema_from_json(const Json& j);

Json plan_to_json(const PlanNode& n);
PlanPtr plan_from_json(const Json& j);

Json spec_to_json(const InterfaceSpec& spec);
/// PlanFormatError naming the offending path on malformed documents.
InterfaceSpec spec_from_json(const Json& j);

InterfaceSpec load_spec(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

}  // namespace pvd
