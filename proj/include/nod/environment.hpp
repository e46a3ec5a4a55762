#pragma once

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nod/json_util.hpp"
#include "nod/message.hpp"
#include "nod/tool_schema.hpp"

namespace nod::env {

// {"users": {id: {...}}, "orders": {id: {...}}, "products": {id: {...}}}
using Database = Json;

Database load_database(const std::filesystem::path& path);

// sha256 of the canonical (key-sorted, compact) serialization.
std::string db_hash(const Database& db);

struct Snapshot {
  std::string hash;
  Database db;
};

Snapshot snapshot(const Database& db);
Database restore(const Snapshot& snap);

struct Change {
  enum class Kind { added, removed, changed };
  Kind kind;
  std::string path;  // JSON pointer of the leaf, e.g. /orders/#W1/status
  Json before;
  Json after;
};

std::string_view to_string(Change::Kind kind);

// Leaf-level differences; empty exactly when the hashes match.
std::vector<Change> diff(const Database& a, const Database& b);

// Referential integrity and status checks; empty when the database is sound.
std::vector<std::string> integrity_problems(const Database& db);

class UnknownTool : public std::runtime_error {
 public:
  explicit UnknownTool(const std::string& name) : std::runtime_error("unknown tool: " + name), name(name) {}
  std::string name;
};

class CriticalRegistry {
 public:
  static const CriticalRegistry& for_domain(const std::string& domain);
  static std::vector<std::string> domains();

  bool is_critical(const std::string& tool) const { return names_.count(tool) > 0; }
  const std::set<std::string>& names() const { return names_; }

 private:
  explicit CriticalRegistry(std::set<std::string> names) : names_(std::move(names)) {}
  std::set<std::string> names_;
};

std::vector<ToolSchema> retail_tool_schemas();

struct ToolResult {
  std::string text;
  bool error = false;  // the text is an in-band "Error: ..." reply
  bool mutated = false;
  bool ends_episode = false;  // transfer to a human
};

class Environment {
 public:
  explicit Environment(Database initial, std::string domain = "retail");

  const Database& db() const { return db_; }
  std::string hash() const { return db_hash(db_); }
  const std::string& domain() const { return domain_; }

  const std::vector<ToolSchema>& tool_schemas() const { return schemas_; }
  bool has_tool(const std::string& name) const;
  bool is_critical(const std::string& name) const { return registry_->is_critical(name); }

  // Runs one call. Throws UnknownTool for unregistered names; everything
  // else, including bad arguments, comes back as an in-band error with the
  // database untouched.
  ToolResult execute(const ToolCall& call);

  void reset(Database db) { db_ = std::move(db); }

 private:
  Database db_;
  std::string domain_;
  std::vector<ToolSchema> schemas_;
  const CriticalRegistry* registry_;
};

}  // namespace nod::env
