#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nod/backends.hpp"
#include "nod/json_util.hpp"
#include "nod/message.hpp"

namespace nod::state {

enum class GoalStatus { ongoing, completed };
enum class ItemRole { target, context, unknown };
enum class SubtaskStatus { pending, in_progress, completed, aborted };

struct TaskGoal {
  std::string goal_type;
  std::string description;
  GoalStatus status = GoalStatus::ongoing;
  bool operator==(const TaskGoal&) const = default;
};

struct UserProfile {
  std::optional<std::string> user_id;
  std::optional<std::string> name;
  bool authenticated = false;
  bool operator==(const UserProfile&) const = default;
};

struct RecordRef {
  std::optional<std::string> record_id;
  std::optional<std::string> status;
  std::string description;
  bool operator==(const RecordRef&) const = default;
};

struct ItemRef {
  std::optional<std::string> item_id;
  std::optional<std::string> record_id;
  ItemRole role = ItemRole::unknown;
  std::string spec_details;
  bool operator==(const ItemRef&) const = default;
};

struct KeyEntities {
  UserProfile user_profile;
  std::vector<RecordRef> records_relevant;
  std::vector<ItemRef> items_relevant;
  bool operator==(const KeyEntities&) const = default;
};

struct SubTask {
  std::string id;
  std::string description;
  SubtaskStatus status = SubtaskStatus::pending;
  bool operator==(const SubTask&) const = default;
};

struct CurrentSubtask {
  std::optional<std::string> id;
  std::string description;
  bool operator==(const CurrentSubtask&) const = default;
};

struct GlobalState {
  TaskGoal task_goal;
  std::vector<std::string> active_constraints;
  std::vector<std::string> missing_information;
  KeyEntities key_entities;
  std::vector<SubTask> sub_tasks;
  CurrentSubtask current_subtask;
  std::string conversation_summary;
  bool operator==(const GlobalState&) const = default;
};

std::string_view to_string(GoalStatus v);
std::string_view to_string(ItemRole v);
std::string_view to_string(SubtaskStatus v);

// Fields in the schema's order.
Json to_json(const GlobalState& state);
// Compact JSON, schema field order, no trailing whitespace.
std::string serialize(const GlobalState& state);

enum class ValidationMode { strict, lenient };

struct ValidationIssue {
  std::string path;  // dotted, e.g. "key_entities.items_relevant[0].role"
  std::string rule;  // missing_field, wrong_type, bad_enum, unknown_field,
                     // duplicate_id, dangling_reference, not_json, not_object
  std::string allowed;  // allowed values or expected type, when meaningful

  bool operator==(const ValidationIssue&) const = default;
};

std::string describe(const ValidationIssue& issue);

struct ValidationFailure {
  std::vector<ValidationIssue> issues;
  std::string summary() const;  // one "- ..." line per issue
};

struct ValidationResult {
  std::optional<GlobalState> state;
  ValidationFailure failure;
  std::vector<ValidationIssue> warnings;  // lenient-mode downgrades

  bool ok() const { return state.has_value(); }
};

// Validates a parsed document.
ValidationResult validate_state(const Json& document, ValidationMode mode = ValidationMode::strict);
// Validates model output text: fences stripped, largest JSON object taken.
ValidationResult validate_state(std::string_view raw, ValidationMode mode = ValidationMode::strict);
inline ValidationResult validate_state(const char* raw, ValidationMode mode = ValidationMode::strict) {
  return validate_state(std::string_view(raw), mode);
}
inline ValidationResult validate_state(const std::string& raw, ValidationMode mode = ValidationMode::strict) {
  return validate_state(std::string_view(raw), mode);
}

// Decodes a document already known to be valid (e.g. read back from a
// trajectory); throws std::invalid_argument otherwise.
GlobalState from_json(const Json& document);

// ---------------------------------------------------------------------------
// Navigator

struct StateUpdateInput {
  std::optional<GlobalState> previous_state;
  Message observation;
  History recent_context;
  std::optional<std::string> director_feedback;
};

struct RepairPolicy {
  int max_repairs = 1;
  ValidationMode mode = ValidationMode::strict;
};

struct NavigationResult {
  GlobalState state;
  std::string raw;  // the accepted reply, byte for byte
  int attempts = 1;
  std::vector<ValidationIssue> warnings;
};

class NavigationFailure : public std::runtime_error {
 public:
  NavigationFailure(std::vector<std::string> raws, ValidationFailure last)
      : std::runtime_error("navigator output failed validation"),
        raws(std::move(raws)),
        last(std::move(last)) {}
  std::vector<std::string> raws;
  ValidationFailure last;
};

constexpr std::string_view kNoPriorState = "no prior state";

// The user message sent to the Navigator (system prompt is the navigator
// template).
std::string render_navigator_input(const StateUpdateInput& input);

backends::ChatRequest navigator_request(const StateUpdateInput& input, backends::Sampling sampling);

NavigationResult navigate(const StateUpdateInput& input, backends::ModelBackend& backend,
                          const RepairPolicy& policy = {}, backends::Sampling sampling = {});

}  // namespace nod::state
