#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nod::prompts {

struct PromptTemplate {
  std::string id;
  int version = 1;
  std::vector<std::string> placeholders;
  std::string body;
  std::string content_hash;  // sha256 of the whole file text
};

using Bindings = std::map<std::string, std::string>;

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownTemplate : public TemplateError {
 public:
  explicit UnknownTemplate(const std::string& id)
      : TemplateError("unknown prompt template: " + id), id(id) {}
  std::string id;
};

class MissingPlaceholder : public TemplateError {
 public:
  MissingPlaceholder(const std::string& template_id, const std::string& name)
      : TemplateError("template " + template_id + " needs a value for {" + name + "}"),
        template_id(template_id),
        placeholder(name) {}
  std::string template_id;
  std::string placeholder;
};

// A binding that the template does not declare.
class UnexpectedBinding : public TemplateError {
 public:
  UnexpectedBinding(const std::string& template_id, const std::string& name)
      : TemplateError("template " + template_id + " has no placeholder {" + name + "}"),
        template_id(template_id),
        placeholder(name) {}
  std::string template_id;
  std::string placeholder;
};

// Parses "---\nid: ...\nversion: ...\nplaceholders: a, b\n---\nbody".
// Every {identifier} in the body must be declared and vice versa.
PromptTemplate parse_template(std::string_view file_text);

// {identifier} markers in text, in order of first appearance.
std::vector<std::string> find_placeholders(std::string_view text);

class Catalog {
 public:
  static const Catalog& builtin();
  static Catalog from_files(const std::vector<std::pair<std::string, std::string>>& files);

  bool contains(const std::string& id) const;
  const PromptTemplate& get(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Single-pass substitution: substituted values are never rescanned.
  std::string render(const std::string& id, const Bindings& bindings = {}) const;

  // Hash over all template hashes in id order.
  const std::string& catalog_hash() const { return catalog_hash_; }

 private:
  std::map<std::string, PromptTemplate> templates_;
  std::string catalog_hash_;
};

inline std::string render(const std::string& id, const Bindings& bindings = {}) {
  return Catalog::builtin().render(id, bindings);
}

// Policy text for a domain; only "retail" ships.
std::string domain_policy(const std::string& domain);

}  // namespace nod::prompts
