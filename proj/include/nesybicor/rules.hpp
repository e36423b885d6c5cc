#pragma once

// Stratified default-rule sets: representation, evaluation as a decision
// list, structural checks, and the textual rule syntax.
//
//   target(X,'<class>') :- <lit>, ..., <lit>.
//   ab<j>(X) :- <lit>, ..., <lit>.
//   <lit> ::= [not ]<pred>(X) | <pred>(X,'1') | <pred>(X,'0')

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nesybicor {

struct Literal {
  std::string predicate;
  bool negated = false;

  friend bool operator==(const Literal&, const Literal&) = default;
};

struct Rule {
  enum class Head { Target, Abnormality };
  Head kind = Head::Target;
  /// Class name for target rules, "ab<j>" for abnormality rules.
  std::string head;
  std::vector<Literal> body;

  bool is_target() const { return kind == Head::Target; }
  friend bool operator==(const Rule&, const Rule&) = default;
};

/// True for identifiers of the form ab<j> with j >= 1.
bool is_abnormality(const std::string& predicate);

struct RuleSet {
  std::vector<Rule> rules;

  /// Filter predicates in order of first appearance in rule bodies.
  std::vector<std::string> predicates() const;
  std::vector<std::string> target_classes() const;
  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

/// No cycle of the predicate dependency graph passes through a negated edge.
bool stratification_check(const RuleSet& rs);
/// Every abnormality identifier used anywhere heads exactly one rule.
bool abx_uniqueness_check(const RuleSet& rs);

class RuleSetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws RuleSetError if an invariant of a rule-set is violated.
void validate_ruleset(const RuleSet& rs);

struct Classification {
  std::optional<std::string> label;        // nullopt = abstention
  std::optional<std::size_t> rule_index;   // index into RuleSet::rules
};

/// First-fire-wins evaluation against a binary vector whose positions are
/// named by `columns`. Construction fails on predicates the columns do not
/// cover and on undefined abnormality identifiers.
class RuleEvaluator {
 public:
  RuleEvaluator(const RuleSet& rs, std::span<const std::string> columns);

  Classification classify(std::span<const std::uint8_t> bits) const;
  /// Whether rule `index`'s full body (including exceptions) holds.
  bool fires(std::size_t index, std::span<const std::uint8_t> bits) const;

 private:
  struct CompiledLiteral {
    bool abnormality = false;
    std::size_t index = 0;  // column or abnormality slot
    bool negated = false;
  };
  bool holds(const CompiledLiteral& lit, std::span<const std::uint8_t> bits, std::vector<std::int8_t>& memo) const;
  bool body_holds(const std::vector<CompiledLiteral>& body, std::span<const std::uint8_t> bits,
                  std::vector<std::int8_t>& memo) const;

  const RuleSet* rs_;
  std::size_t columns_ = 0;
  std::vector<std::vector<CompiledLiteral>> bodies_;
  std::vector<std::vector<std::size_t>> ab_rules_;  // slot -> rule indices heading it
};

/// Columns named f0..f{K-1}.
std::vector<std::string> filter_columns(std::size_t filters);

/// Convenience wrapper: binvec[k] is the truth value of filter predicate f<k>.
Classification classify(const RuleSet& rs, std::span<const std::uint8_t> binvec);

struct ParseError : std::invalid_argument {
  ParseError(const std::string& message, std::size_t line, std::size_t column);
  std::size_t line;
  std::size_t column;
};

RuleSet parse_ruleset(const std::string& text);

/// Predicate renaming applied when printing (e.g. filter id -> concept label).
using PredicateNames = std::map<std::string, std::string>;

std::string print_rule(const Rule& rule, const PredicateNames* names = nullptr);
std::string print_ruleset(const RuleSet& rs, const PredicateNames* names = nullptr);

/// Rule-set with every filter predicate renamed through `names` (missing entries kept).
RuleSet rename_predicates(const RuleSet& rs, const PredicateNames& names);

}  // namespace nesybicor
