#include "nod/json_util.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

namespace nod {

std::string canonical_dump(const Json& value) {
  // nlohmann::json stores objects in a std::map, so conversion sorts keys
  // recursively.
  const nlohmann::json sorted = nlohmann::json::parse(value.dump());
  return sorted.dump();
}

std::string compact_dump(const Json& value) { return value.dump(); }

namespace {

void write_tool_style(const Json& value, std::string& out) {
  if (value.is_object()) {
    out.push_back('{');
    bool first = true;
    for (const auto& [key, child] : value.items()) {
      if (!first) out += ", ";
      first = false;
      out += Json(key).dump();
      out += ": ";
      write_tool_style(child, out);
    }
    out.push_back('}');
  } else if (value.is_array()) {
    out.push_back('[');
    bool first = true;
    for (const auto& child : value) {
      if (!first) out += ", ";
      first = false;
      write_tool_style(child, out);
    }
    out.push_back(']');
  } else {
    out += value.dump();
  }
}

}  // namespace

std::string tool_style_dump(const Json& value) {
  std::string out;
  write_tool_style(value, out);
  return out;
}

bool same_content(const Json& a, const Json& b) {
  return canonical_dump(a) == canonical_dump(b);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0x0f]);
  }
  return hex;
}

std::string strip_code_fences(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::string(text);
  auto body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) return std::string(text);
  ++body_start;
  const auto close = text.find("```", body_start);
  if (close == std::string_view::npos) return std::string(text.substr(body_start));
  return std::string(text.substr(body_start, close - body_start));
}

std::optional<Json> try_parse(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
}

std::optional<Json> extract_json_object(std::string_view raw) {
  const std::string text = strip_code_fences(raw);

  // Collect every balanced {...} span, honoring string literals.
  struct Span {
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Span> spans;
  std::vector<std::size_t> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && !stack.empty()) {
      in_string = true;
    } else if (c == '{') {
      stack.push_back(i);
    } else if (c == '}' && !stack.empty()) {
      spans.push_back({stack.back(), i + 1});
      stack.pop_back();
    }
  }

  std::stable_sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    return (a.end - a.begin) > (b.end - b.begin);
  });
  for (const auto& span : spans) {
    auto parsed = try_parse(std::string_view(text).substr(span.begin, span.end - span.begin));
    if (parsed && parsed->is_object()) return parsed;
  }
  return std::nullopt;
}

}  // namespace nod
