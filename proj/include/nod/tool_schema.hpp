#pragma once

#include <string>
#include <vector>

#include "nod/json_util.hpp"

namespace nod {

struct ToolParameter {
  std::string name;
  std::string type;  // JSON-schema type: string, array, object, number, boolean
  bool required = true;
  std::string description;
  std::string item_type;  // element type when type == "array"
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<ToolParameter> parameters;
  bool mutating = false;
};

// {"type": "function", "function": {"name", "description", "parameters"}}
Json to_function_spec(const ToolSchema& schema);

}  // namespace nod
