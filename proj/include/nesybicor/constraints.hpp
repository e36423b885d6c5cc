#pragma once

// Per-class desired/undesired concept lists, read from JSON:
//   {"desert_road": {"undesired": ["sky"], "desired": ["sand"]}, ...}

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nesybicor {

struct ClassConstraint {
  std::vector<std::string> undesired;
  std::vector<std::string> desired;
};

struct ConstraintSet {
  std::map<std::string, ClassConstraint> classes;

  bool empty() const { return classes.empty(); }
  /// Throws std::invalid_argument if a concept is both desired and undesired for a class.
  void validate() const;
  bool is_undesired(const std::string& cls, const std::string& concept_name) const;
  bool is_desired(const std::string& cls, const std::string& concept_name) const;
};

ConstraintSet parse_constraints(const std::string& json_text);
std::string constraints_to_json(const ConstraintSet& constraints);

}  // namespace nesybicor
