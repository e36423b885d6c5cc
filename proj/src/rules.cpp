#include "nesybicor/rules.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>

#include "nesybicor/binarizer.hpp"

namespace nesybicor {

bool is_abnormality(const std::string& predicate) {
  if (predicate.size() < 3 || predicate.compare(0, 2, "ab") != 0) return false;
  if (predicate[2] == '0') return false;
  return std::all_of(predicate.begin() + 2, predicate.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::vector<std::string> RuleSet::predicates() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rules)
    for (const auto& l : r.body)
      if (!is_abnormality(l.predicate) && seen.insert(l.predicate).second) out.push_back(l.predicate);
  return out;
}

std::vector<std::string> RuleSet::target_classes() const {
  std::vector<std::string> out;
  for (const auto& r : rules)
    if (r.is_target() && std::find(out.begin(), out.end(), r.head) == out.end()) out.push_back(r.head);
  return out;
}

bool stratification_check(const RuleSet& rs) {
  // Nodes are abnormality predicates (the only predicates both defined and used).
  std::map<std::string, std::vector<std::pair<std::string, bool>>> edges;
  for (const auto& r : rs.rules) {
    if (r.is_target()) continue;
    for (const auto& l : r.body)
      if (is_abnormality(l.predicate)) edges[r.head].emplace_back(l.predicate, l.negated);
  }
  // Tarjan SCC; a negated edge inside one component means a cycle through negation.
  std::map<std::string, int> index, low;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  std::map<std::string, int> component;
  int counter = 0, components = 0;
  std::function<void(const std::string&)> connect = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (const auto& [w, neg] : edges[v]) {
      if (!index.count(w)) {
        connect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component[w] = components;
      } while (w != v);
      ++components;
    }
  };
  std::vector<std::string> nodes;
  for (const auto& [v, _] : edges) nodes.push_back(v);
  for (const auto& v : nodes)
    if (!index.count(v)) connect(v);
  for (const auto& [v, out] : edges)
    for (const auto& [w, neg] : out)
      if (neg && component.count(w) && component[v] == component[w]) return false;
  return true;
}

bool abx_uniqueness_check(const RuleSet& rs) {
  std::map<std::string, int> heads;
  for (const auto& r : rs.rules) {
    if (!r.is_target()) ++heads[r.head];
    for (const auto& l : r.body)
      if (is_abnormality(l.predicate)) heads.try_emplace(l.predicate, 0);
  }
  return std::all_of(heads.begin(), heads.end(), [](const auto& kv) { return kv.second == 1; });
}

void validate_ruleset(const RuleSet& rs) {
  for (const auto& r : rs.rules) {
    if (!r.is_target() && !is_abnormality(r.head))
      throw RuleSetError("rule head '" + r.head + "' is neither a target nor an abnormality identifier");
    if (r.is_target() && is_abnormality(r.head))
      throw RuleSetError("abnormality identifier '" + r.head + "' used as a class");
  }
  if (!abx_uniqueness_check(rs))
    throw RuleSetError("every abnormality predicate must head exactly one rule");
  if (!stratification_check(rs)) throw RuleSetError("rule-set has a cycle through negation");
}

RuleEvaluator::RuleEvaluator(const RuleSet& rs, std::span<const std::string> columns)
    : rs_(&rs), columns_(columns.size()) {
  std::map<std::string, std::size_t> column_index;
  for (std::size_t i = 0; i < columns.size(); ++i) column_index.emplace(columns[i], i);
  std::map<std::string, std::size_t> ab_slot;
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    const auto& r = rs.rules[i];
    if (r.is_target()) continue;
    auto [it, inserted] = ab_slot.emplace(r.head, ab_rules_.size());
    if (inserted) ab_rules_.emplace_back();
    ab_rules_[it->second].push_back(i);
  }
  for (const auto& r : rs.rules) {
    std::vector<CompiledLiteral> body;
    for (const auto& l : r.body) {
      CompiledLiteral c;
      c.negated = l.negated;
      if (is_abnormality(l.predicate)) {
        auto it = ab_slot.find(l.predicate);
        if (it == ab_slot.end()) throw RuleSetError("abnormality predicate '" + l.predicate + "' is never defined");
        c.abnormality = true;
        c.index = it->second;
      } else {
        auto it = column_index.find(l.predicate);
        if (it == column_index.end()) throw RuleSetError("unknown predicate '" + l.predicate + "'");
        c.index = it->second;
      }
      body.push_back(c);
    }
    bodies_.push_back(std::move(body));
  }
}

bool RuleEvaluator::holds(const CompiledLiteral& lit, std::span<const std::uint8_t> bits,
                          std::vector<std::int8_t>& memo) const {
  bool value;
  if (!lit.abnormality) {
    value = bits[lit.index] != 0;
  } else {
    // memo: -1 unknown, 2 in progress, 0/1 resolved. Re-entry yields false (least model).
    std::int8_t& m = memo[lit.index];
    if (m == 0 || m == 1) {
      value = m == 1;
    } else if (m == 2) {
      value = false;
    } else {
      m = 2;
      bool any = false;
      for (std::size_t r : ab_rules_[lit.index])
        if (body_holds(bodies_[r], bits, memo)) {
          any = true;
          break;
        }
      m = any ? 1 : 0;
      value = any;
    }
  }
  return lit.negated ? !value : value;
}

bool RuleEvaluator::body_holds(const std::vector<CompiledLiteral>& body, std::span<const std::uint8_t> bits,
                               std::vector<std::int8_t>& memo) const {
  for (const auto& lit : body)
    if (!holds(lit, bits, memo)) return false;
  return true;
}

bool RuleEvaluator::fires(std::size_t index, std::span<const std::uint8_t> bits) const {
  if (bits.size() < columns_)
    throw std::invalid_argument("binary vector has " + std::to_string(bits.size()) + " entries, rule-set needs " +
                                std::to_string(columns_));
  std::vector<std::int8_t> memo(ab_rules_.size(), -1);
  return body_holds(bodies_.at(index), bits, memo);
}

Classification RuleEvaluator::classify(std::span<const std::uint8_t> bits) const {
  if (bits.size() < columns_)
    throw std::invalid_argument("binary vector has " + std::to_string(bits.size()) + " entries, rule-set needs " +
                                std::to_string(columns_));
  std::vector<std::int8_t> memo(ab_rules_.size(), -1);
  for (std::size_t i = 0; i < rs_->rules.size(); ++i) {
    if (!rs_->rules[i].is_target()) continue;
    if (body_holds(bodies_[i], bits, memo)) return {rs_->rules[i].head, i};
  }
  return {};
}

std::vector<std::string> filter_columns(std::size_t filters) {
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < filters; ++k) cols.push_back(filter_predicate(k));
  return cols;
}

Classification classify(const RuleSet& rs, std::span<const std::uint8_t> binvec) {
  const auto cols = filter_columns(binvec.size());
  return RuleEvaluator(rs, cols).classify(binvec);
}

// --- text -------------------------------------------------------------------

ParseError::ParseError(const std::string& message, std::size_t line_, std::size_t column_)
    : std::invalid_argument("line " + std::to_string(line_) + ", column " + std::to_string(column_) + ": " + message),
      line(line_),
      column(column_) {}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  RuleSet parse() {
    RuleSet rs;
    skip_space();
    while (pos_ < text_.size()) {
      rs.rules.push_back(rule());
      skip_space();
    }
    return rs;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::string found = pos_ < text_.size() ? std::string("'") + text_[pos_] + "'" : "end of input";
    throw ParseError(what + ", found " + found, line_, col_);
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  bool accept(char c) {
    skip_space();
    if (peek() != c) return false;
    advance();
    return true;
  }

  std::string identifier() {
    skip_space();
    const char c = peek();
    if (!std::islower(static_cast<unsigned char>(c))) fail("expected a predicate name");
    std::string out;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
      out += peek();
      advance();
    }
    return out;
  }

  // 'x', `x', "x"
  std::string quoted() {
    skip_space();
    const char open = peek();
    if (open != '\'' && open != '`' && open != '"') fail("expected a quoted constant");
    advance();
    const char close = open == '"' ? '"' : '\'';
    std::string out;
    while (pos_ < text_.size() && peek() != close) {
      if (peek() == '\n') fail("unterminated quoted constant");
      out += peek();
      advance();
    }
    if (peek() != close) fail("unterminated quoted constant");
    advance();
    return out;
  }

  void variable() {
    skip_space();
    if (peek() != 'X') fail("expected variable X");
    advance();
  }

  // Returns the truth flag of an optional second argument: '1'/'True' positive, '0'/'False' negated.
  bool optional_value() {
    if (!accept(',')) return true;
    const auto line = line_, col = col_;
    const std::string v = quoted();
    if (v == "1" || v == "True" || v == "true") return true;
    if (v == "0" || v == "False" || v == "false") return false;
    throw ParseError("unsupported predicate value '" + v + "'", line, col);
  }

  Literal literal() {
    skip_space();
    bool negated = false;
    const auto save_pos = pos_, save_line = line_, save_col = col_;
    std::string name = identifier();
    if (name == "not" && std::isspace(static_cast<unsigned char>(peek()))) {
      negated = true;
      name = identifier();
    } else if (name == "not" && peek() != '(') {
      pos_ = save_pos;
      line_ = save_line;
      col_ = save_col;
      fail("expected a literal");
    }
    if (name == "target") fail("target cannot appear in a rule body");
    expect('(');
    variable();
    const bool positive = optional_value();
    expect(')');
    if (!positive) negated = !negated;
    return {name, negated};
  }

  Rule rule() {
    Rule r;
    const auto head_line = line_, head_col = col_;
    const std::string name = identifier();
    expect('(');
    variable();
    if (name == "target") {
      r.kind = Rule::Head::Target;
      expect(',');
      r.head = quoted();
      if (r.head.empty()) throw ParseError("empty class name", head_line, head_col);
    } else if (is_abnormality(name)) {
      r.kind = Rule::Head::Abnormality;
      r.head = name;
      if (!optional_value()) throw ParseError("abnormality head cannot be negated", head_line, head_col);
    } else {
      throw ParseError("rule head must be target/2 or ab<j>/1, got '" + name + "'", head_line, head_col);
    }
    expect(')');
    skip_space();
    if (accept('.')) return r;
    expect(':');
    if (peek() != '-') fail("expected ':-'");
    advance();
    r.body.push_back(literal());
    while (accept(',')) r.body.push_back(literal());
    expect('.');
    return r;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

std::string display(const std::string& predicate, const PredicateNames* names) {
  if (!names) return predicate;
  auto it = names->find(predicate);
  return it == names->end() ? predicate : it->second;
}

}  // namespace

RuleSet parse_ruleset(const std::string& text) { return Parser(text).parse(); }

std::string print_rule(const Rule& rule, const PredicateNames* names) {
  std::ostringstream out;
  if (rule.is_target())
    out << "target(X,'" << rule.head << "')";
  else
    out << rule.head << "(X)";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    out << (i == 0 ? " :- " : ", ");
    const auto& l = rule.body[i];
    if (l.negated) out << "not ";
    out << (is_abnormality(l.predicate) ? l.predicate : display(l.predicate, names)) << "(X)";
  }
  out << '.';
  return out.str();
}

std::string print_ruleset(const RuleSet& rs, const PredicateNames* names) {
  std::string out;
  for (const auto& r : rs.rules) {
    out += print_rule(r, names);
    out += '\n';
  }
  return out;
}

RuleSet rename_predicates(const RuleSet& rs, const PredicateNames& names) {
  RuleSet out = rs;
  for (auto& r : out.rules)
    for (auto& l : r.body)
      if (!is_abnormality(l.predicate)) l.predicate = display(l.predicate, &names);
  return out;
}

}  // namespace nesybicor
