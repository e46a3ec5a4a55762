#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nod {

// Every document in the kernel keeps insertion order; canonical (sorted)
// forms are derived on demand for hashing and comparison.
using Json = nlohmann::ordered_json;

// Compact, key-sorted serialization used for hashing and equality.
std::string canonical_dump(const Json& value);

// Compact serialization preserving key order.
std::string compact_dump(const Json& value);

// Serialization with ", " and ": " separators, the shape service tools
// return to agents.
std::string tool_style_dump(const Json& value);

// Order-insensitive structural equality for objects.
bool same_content(const Json& a, const Json& b);

std::string sha256_hex(std::string_view bytes);

// Removes a surrounding ``` / ```json fence, if present.
std::string strip_code_fences(std::string_view text);

// Returns the largest balanced-brace substring of `text` (after fence
// stripping) that parses as a JSON object.
std::optional<Json> extract_json_object(std::string_view text);

// Parses `text` as JSON; std::nullopt on any syntax error.
std::optional<Json> try_parse(std::string_view text);

}  // namespace nod
