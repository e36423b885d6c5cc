#include "nesybicor/constraints.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace nesybicor {

void ConstraintSet::validate() const {
  for (const auto& [cls, c] : classes)
    for (const auto& u : c.undesired)
      if (std::find(c.desired.begin(), c.desired.end(), u) != c.desired.end())
        throw std::invalid_argument("constraints for class '" + cls + "' list '" + u +
                                    "' as both desired and undesired");
}

namespace {
bool listed(const std::map<std::string, ClassConstraint>& classes, const std::string& cls, const std::string& name,
            bool undesired) {
  auto it = classes.find(cls);
  if (it == classes.end()) return false;
  const auto& list = undesired ? it->second.undesired : it->second.desired;
  return std::find(list.begin(), list.end(), name) != list.end();
}
}  // namespace

bool ConstraintSet::is_undesired(const std::string& cls, const std::string& concept_name) const {
  return listed(classes, cls, concept_name, true);
}

bool ConstraintSet::is_desired(const std::string& cls, const std::string& concept_name) const {
  return listed(classes, cls, concept_name, false);
}

ConstraintSet parse_constraints(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("constraints: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("constraints: top level must be an object keyed by class");
  ConstraintSet out;
  for (const auto& [cls, entry] : doc.items()) {
    if (!entry.is_object()) throw std::invalid_argument("constraints: entry for '" + cls + "' must be an object");
    ClassConstraint c;
    for (const auto& [key, value] : entry.items()) {
      if (key != "undesired" && key != "desired")
        throw std::invalid_argument("constraints: unknown key '" + key + "' for class '" + cls + "'");
      if (!value.is_array()) throw std::invalid_argument("constraints: '" + cls + "." + key + "' must be a list");
      auto& list = key == "undesired" ? c.undesired : c.desired;
      for (const auto& v : value) {
        if (!v.is_string()) throw std::invalid_argument("constraints: '" + cls + "." + key + "' holds a non-string");
        list.push_back(v.get<std::string>());
      }
    }
    out.classes.emplace(cls, std::move(c));
  }
  out.validate();
  return out;
}

std::string constraints_to_json(const ConstraintSet& constraints) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [cls, c] : constraints.classes) doc[cls] = {{"undesired", c.undesired}, {"desired", c.desired}};
  return doc.dump(2) + "\n";
}

}  // namespace nesybicor
