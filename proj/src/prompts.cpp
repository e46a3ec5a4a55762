#include "nod/prompts.hpp"

#include <cctype>
#include <set>
#include <sstream>

#include "nod/json_util.hpp"

namespace nod::prompts {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_template_files();
}

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Calls fn(begin, end, name) for each {identifier} marker.
template <typename Fn>
void scan_markers(std::string_view text, Fn&& fn) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !(std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) continue;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    if (j < text.size() && text[j] == '}') {
      fn(i, j + 1, std::string(text.substr(i + 1, j - i - 1)));
      i = j;
    }
  }
}

}  // namespace

std::vector<std::string> find_placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  scan_markers(text, [&](std::size_t, std::size_t, std::string name) {
    if (seen.insert(name).second) out.push_back(std::move(name));
  });
  return out;
}

PromptTemplate parse_template(std::string_view file_text) {
  PromptTemplate t;
  t.content_hash = sha256_hex(file_text);
  if (file_text.substr(0, 4) != "---\n") throw TemplateError("template is missing front matter");
  auto close = file_text.find("\n---\n", 3);
  if (close == std::string_view::npos) throw TemplateError("front matter is not closed");
  std::string_view header = file_text.substr(4, close - 4);
  std::string_view body = file_text.substr(close + 5);
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  t.body = std::string(body);

  std::istringstream lines{std::string(header)};
  std::string line;
  bool saw_placeholders = false;
  while (std::getline(lines, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) throw TemplateError("bad front matter line: " + line);
    std::string key = trim(std::string_view(line).substr(0, colon));
    std::string value = trim(std::string_view(line).substr(colon + 1));
    if (key == "id") {
      t.id = value;
    } else if (key == "version") {
      t.version = std::stoi(value);
    } else if (key == "placeholders") {
      saw_placeholders = true;
      std::istringstream parts(value);
      std::string part;
      while (std::getline(parts, part, ',')) {
        std::string name = trim(part);
        if (!name.empty()) t.placeholders.push_back(name);
      }
    } else {
      throw TemplateError("unknown front matter key: " + key);
    }
  }
  if (t.id.empty()) throw TemplateError("template has no id");
  if (!saw_placeholders) throw TemplateError("template " + t.id + " does not declare placeholders");

  std::set<std::string> declared(t.placeholders.begin(), t.placeholders.end());
  std::set<std::string> used;
  for (auto& name : find_placeholders(t.body)) used.insert(name);
  for (const auto& name : used)
    if (!declared.count(name)) throw TemplateError("template " + t.id + " uses undeclared {" + name + "}");
  for (const auto& name : declared)
    if (!used.count(name)) throw TemplateError("template " + t.id + " declares unused {" + name + "}");
  return t;
}

Catalog Catalog::from_files(const std::vector<std::pair<std::string, std::string>>& files) {
  Catalog c;
  for (const auto& [name, text] : files) {
    PromptTemplate t = parse_template(text);
    if (name != t.id + ".txt") throw TemplateError("file " + name + " holds template " + t.id);
    if (c.templates_.count(t.id)) throw TemplateError("duplicate template " + t.id);
    c.templates_.emplace(t.id, std::move(t));
  }
  std::string joined;
  for (const auto& [id, t] : c.templates_) joined += id + ":" + t.content_hash + "\n";
  c.catalog_hash_ = sha256_hex(joined);
  return c;
}

const Catalog& Catalog::builtin() {
  static const Catalog catalog = [] {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& [name, text] : detail::embedded_template_files())
      files.emplace_back(std::string(name), std::string(text));
    return from_files(files);
  }();
  return catalog;
}

bool Catalog::contains(const std::string& id) const { return templates_.count(id) > 0; }

const PromptTemplate& Catalog::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw UnknownTemplate(id);
  return it->second;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

std::string Catalog::render(const std::string& id, const Bindings& bindings) const {
  const PromptTemplate& t = get(id);
  for (const auto& name : t.placeholders)
    if (!bindings.count(name)) throw MissingPlaceholder(id, name);
  for (const auto& [name, _] : bindings) {
    bool declared = false;
    for (const auto& p : t.placeholders) declared = declared || p == name;
    if (!declared) throw UnexpectedBinding(id, name);
  }
  std::string out;
  std::size_t copied = 0;
  scan_markers(t.body, [&](std::size_t begin, std::size_t end, const std::string& name) {
    out.append(t.body, copied, begin - copied);
    out += bindings.at(name);
    copied = end;
  });
  out.append(t.body, copied, std::string::npos);
  return out;
}

std::string domain_policy(const std::string& domain) {
  std::string id = domain + "_policy";
  return Catalog::builtin().render(id);
}

}  // namespace nod::prompts
