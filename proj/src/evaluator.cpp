#include "nesybicor/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace nesybicor {

std::vector<std::string> evaluation_columns(std::size_t filters, const LabelMap* labels) {
  auto cols = filter_columns(filters);
  if (!labels) return cols;
  for (auto& c : cols)
    if (auto it = labels->filters.find(c); it != labels->filters.end()) c = it->second.name;
  return cols;
}

std::set<std::string> decision_path(const RuleSet& rs, std::size_t rule_index) {
  if (rule_index >= rs.rules.size()) throw std::out_of_range("decision_path: no rule " + std::to_string(rule_index));
  std::set<std::string> out;
  for (const auto& lit : rs.rules[rule_index].body)
    if (!lit.negated && !is_abnormality(lit.predicate)) out.insert(lit.predicate);
  return out;
}

std::set<std::string> decision_path(const RuleSet& rs, std::span<const std::string> columns,
                                    std::span<const std::uint8_t> bits) {
  const RuleEvaluator ev(rs, columns);
  const auto c = ev.classify(bits);
  if (!c.rule_index) return {};
  return decision_path(rs, *c.rule_index);
}

namespace {

// Table columns are filter ids; a labelled rule-set needs them renamed.
std::vector<std::string> resolve_columns(const RuleSet& rs, const std::vector<std::string>& raw,
                                         const LabelMap& labels) {
  const auto preds = rs.predicates();
  const bool raw_ok = std::all_of(preds.begin(), preds.end(), [&](const std::string& p) {
    return std::find(raw.begin(), raw.end(), p) != raw.end();
  });
  if (raw_ok) return raw;
  auto cols = raw;
  for (auto& c : cols)
    if (auto it = labels.filters.find(c); it != labels.filters.end()) c = it->second.name;
  return cols;
}

bool path_matches(const std::set<std::string>& path, const std::string& cls, const LabelMap& labels,
                  const ConstraintSet& constraints, bool undesired) {
  for (const auto& pred : path)
    for (const auto& tok : labels.tokens(pred))
      if (undesired ? constraints.is_undesired(cls, tok) : constraints.is_desired(cls, tok)) return true;
  return false;
}

struct ImageOutcome {
  std::vector<std::uint8_t> bits;
  std::size_t cnn_prediction = 0;
};

std::vector<ImageOutcome> outcomes(const CnnModel& model, const Dataset& data, const Thresholds& thresholds) {
  std::vector<ImageOutcome> out;
  out.reserve(data.size());
  for (const auto& s : data.samples) {
    const auto fr = forward(model, s.image);
    std::vector<Real> norms(fr.filter_count());
    for (std::size_t k = 0; k < norms.size(); ++k) norms[k] = feature_norm(fr.feature_map(k));
    out.push_back({binarize_norms(norms, thresholds), argmax(fr.logits)});
  }
  return out;
}

double agreement(const RuleSet& rs, const CnnModel& model, const Dataset& data, const Thresholds& thresholds,
                 std::size_t fallback, const LabelMap* labels, bool against_model) {
  if (data.empty()) throw std::invalid_argument("cannot evaluate a rule-set on an empty dataset");
  const auto outs = outcomes(model, data, thresholds);
  std::vector<std::vector<std::uint8_t>> bits;
  for (const auto& o : outs) bits.push_back(o.bits);
  const auto cols = evaluation_columns(model.config.filters, labels);
  const auto preds = rule_predictions(rs, cols, bits, data.class_names, fallback);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    hits += preds[i] == (against_model ? outs[i].cnn_prediction : data.samples[i].label);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

PathShares percent_undesired_desired(const RuleSet& rs, const BinarizationTable& table,
                                     const ConstraintSet& constraints, const LabelMap& labels) {
  const auto cols = resolve_columns(rs, table.columns, labels);
  const RuleEvaluator ev(rs, cols);
  PathShares out;
  std::size_t undesired = 0, desired = 0;
  for (std::size_t i = 0; i < table.rows; ++i) {
    const auto bits = table.row(i);
    const auto c = ev.classify(bits);
    if (!c.rule_index) continue;
    ++out.covered;
    const auto path = decision_path(rs, *c.rule_index);
    if (path_matches(path, *c.label, labels, constraints, true))
      ++undesired;
    else if (path_matches(path, *c.label, labels, constraints, false))
      ++desired;
  }
  if (table.rows > 0) out.coverage = static_cast<double>(out.covered) / static_cast<double>(table.rows);
  if (out.covered > 0) {
    out.pct_undesired = static_cast<double>(undesired) / static_cast<double>(out.covered);
    out.pct_desired = static_cast<double>(desired) / static_cast<double>(out.covered);
  }
  return out;
}

std::vector<std::size_t> rule_predictions(const RuleSet& rs, std::span<const std::string> columns,
                                          const std::vector<std::vector<std::uint8_t>>& bits,
                                          const std::vector<std::string>& class_names, std::size_t fallback) {
  const RuleEvaluator ev(rs, columns);
  std::vector<std::size_t> out;
  out.reserve(bits.size());
  for (const auto& b : bits) {
    const auto c = ev.classify(b);
    if (!c.label) {
      out.push_back(fallback);
      continue;
    }
    auto it = std::find(class_names.begin(), class_names.end(), *c.label);
    if (it == class_names.end()) throw std::invalid_argument("rule-set predicts unknown class '" + *c.label + "'");
    out.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  return out;
}

double fidelity(const RuleSet& rs, const CnnModel& model, const Dataset& data, const Thresholds& thresholds,
                std::size_t fallback, const LabelMap* labels) {
  return agreement(rs, model, data, thresholds, fallback, labels, true);
}

double rule_accuracy(const RuleSet& rs, const CnnModel& model, const Dataset& data, const Thresholds& thresholds,
                     std::size_t fallback, const LabelMap* labels) {
  return agreement(rs, model, data, thresholds, fallback, labels, false);
}

SizeStats ruleset_size_stats(const RuleSet& rs) {
  SizeStats s;
  s.predicates = rs.predicates().size();
  for (const auto& r : rs.rules) s.size += r.body.size();
  return s;
}

MetricsRecord evaluate_ruleset(const RuleSet& rs, const LabelMap& labels, const ConstraintSet& constraints,
                               const CnnModel& model, const Thresholds& thresholds,
                               const BinarizationTable& train_table, const Dataset& eval, std::size_t fallback) {
  const auto preds = rs.predicates();
  const auto raw = filter_columns(model.config.filters);
  const bool labelled = !std::all_of(preds.begin(), preds.end(), [&](const std::string& p) {
    return std::find(raw.begin(), raw.end(), p) != raw.end();
  });
  const LabelMap* lm = labelled ? &labels : nullptr;

  MetricsRecord m;
  const auto outs = outcomes(model, eval, thresholds);
  std::vector<std::vector<std::uint8_t>> bits;
  for (const auto& o : outs) bits.push_back(o.bits);
  const auto rule_preds = rule_predictions(rs, evaluation_columns(model.config.filters, lm), bits,
                                           eval.class_names, fallback);
  std::size_t fid = 0, acc = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    fid += rule_preds[i] == outs[i].cnn_prediction;
    acc += rule_preds[i] == eval.samples[i].label;
  }
  if (!eval.empty()) {
    m.fidelity = static_cast<double>(fid) / static_cast<double>(eval.size());
    m.accuracy = static_cast<double>(acc) / static_cast<double>(eval.size());
  }
  const auto st = ruleset_size_stats(rs);
  m.predicates = st.predicates;
  m.size = st.size;
  const auto shares = percent_undesired_desired(rs, train_table, constraints, labels);
  m.pct_undesired = shares.pct_undesired;
  m.pct_desired = shares.pct_desired;
  m.coverage = shares.coverage;
  return m;
}

void write_metrics_csv_header(std::ostream& out) {
  out << "fidelity,accuracy,predicates,size,pct_undesired,pct_desired,coverage\n";
}

void write_metrics_csv_row(const MetricsRecord& m, std::ostream& out) {
  out << std::setprecision(6) << m.fidelity << ',' << m.accuracy << ',' << m.predicates << ',' << m.size << ','
      << m.pct_undesired << ',' << m.pct_desired << ',' << m.coverage << '\n';
}

}  // namespace nesybicor
