#include "nesybicor/bias.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <stdexcept>

namespace nesybicor {

std::size_t ConceptBank::vector_count() const {
  std::size_t n = 0;
  for (const auto& [_, b] : classes) n += b.undesired.size() + b.desired.size();
  return n;
}

const ClassBank* ConceptBank::find(const std::string& cls) const {
  auto it = classes.find(cls);
  return it == classes.end() ? nullptr : &it->second;
}

void LossParams::validate() const {
  if (!std::isfinite(lambda_b) || !std::isfinite(lambda_g) || lambda_b < 0 || lambda_g < 0)
    throw std::invalid_argument("loss weights must be finite and non-negative");
}

void CorrectionConfig::validate() const {
  if (recalibrate_every < 1) throw std::invalid_argument("recalibration period must be >= 1 epoch");
  if (epochs < recalibrate_every) throw std::invalid_argument("correction epochs must be >= the recalibration period");
  if (top_images < 1) throw std::invalid_argument("top image count must be >= 1");
  loss.validate();
}

Extraction extract_ruleset(const CnnModel& model, const Dataset& data, const ExtractionParams& params) {
  Extraction ex;
  ex.norms = build_norm_table(model, data);
  ex.thresholds = compute_thresholds(ex.norms, params.binarizer);
  ex.table = binarize(ex.norms, ex.thresholds, data.class_names);
  ex.rules = learn_ruleset(ex.table, params.fold);
  ex.labels = label_all(model, data, ex.norms, ex.rules, params.labels);
  return ex;
}

Tensor filter_repr_vector(const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t filter,
                          std::size_t top) {
  if (norms.rows != data.size()) throw std::invalid_argument("norm table does not match the dataset");
  if (norms.rows == 0) throw std::invalid_argument("filter_repr_vector: empty dataset");
  if (norms.rows < top) {
    std::cerr << "warning: only " << norms.rows << " images available for representation vectors (wanted " << top
              << ")\n";
    top = norms.rows;
  }
  const auto idx = top_m_images(norms, filter, top);
  Tensor mean({model.config.feature_map_size()});
  for (auto i : idx) {
    const auto map = forward(model, data.samples[i].image).flat_map(filter);
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += map[p];
  }
  for (std::size_t p = 0; p < mean.size(); ++p) mean[p] /= static_cast<Real>(idx.size());
  return mean;
}

std::vector<std::string> positively_associated(const RuleSet& rs, const std::string& cls) {
  std::vector<std::string> out;
  for (const auto& r : rs.rules) {
    if (!r.is_target() || r.head != cls) continue;
    for (const auto& lit : r.body)
      if (!lit.negated && !is_abnormality(lit.predicate) &&
          std::find(out.begin(), out.end(), lit.predicate) == out.end())
        out.push_back(lit.predicate);
  }
  return out;
}

namespace {

std::optional<std::size_t> filter_of(const std::string& predicate, const LabelMap& labels) {
  if (auto k = parse_filter_predicate(predicate)) return k;
  for (const auto& [_, l] : labels.filters)
    if (l.name == predicate) return l.filter;
  return std::nullopt;
}

}  // namespace

std::optional<ConceptVector> concept_vector(const std::string& concept_name, const std::string& cls,
                                            const RuleSet& rs, const LabelMap& labels, const CnnModel& model,
                                            const Dataset& data, const NormTable& norms, std::size_t top) {
  ConceptVector cv;
  cv.concept_name = concept_name;
  cv.class_name = cls;
  std::vector<std::size_t> filters;
  for (const auto& pred : positively_associated(rs, cls)) {
    const auto toks = labels.tokens(pred);
    if (std::find(toks.begin(), toks.end(), concept_name) == toks.end()) continue;
    const auto k = filter_of(pred, labels);
    if (!k) continue;
    filters.push_back(*k);
    cv.filters.push_back(pred);
  }
  if (filters.empty()) return std::nullopt;
  cv.values = Tensor({model.config.feature_map_size()});
  for (auto k : filters) {
    const auto v = filter_repr_vector(model, data, norms, k, top);
    for (std::size_t p = 0; p < v.size(); ++p) cv.values[p] += v[p];
  }
  for (std::size_t p = 0; p < cv.values.size(); ++p) cv.values[p] /= static_cast<Real>(filters.size());
  return cv;
}

ConceptBank build_concept_bank(const ConstraintSet& constraints, const RuleSet& rs, const LabelMap& labels,
                               const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t top) {
  ConceptBank bank;
  for (const auto& [cls, c] : constraints.classes) {
    ClassBank cb;
    for (const auto& name : c.undesired)
      if (auto v = concept_vector(name, cls, rs, labels, model, data, norms, top)) cb.undesired.push_back(*v);
    for (const auto& name : c.desired)
      if (auto v = concept_vector(name, cls, rs, labels, model, data, norms, top)) cb.desired.push_back(*v);
    if (!cb.undesired.empty() || !cb.desired.empty()) bank.classes.emplace(cls, std::move(cb));
  }
  return bank;
}

Var semantic_similarity_loss(const Var& feature_maps, const ClassBank& bank, const LossParams& params) {
  const auto& shape = feature_maps.value().shape();
  if (shape.size() != 3) throw ShapeError("semantic_similarity_loss expects [K,h,w] maps, got " + shape_string(shape));
  const std::size_t dim = shape[1] * shape[2];
  std::vector<Var> refs;
  std::vector<Real> coeffs;
  for (const auto& v : bank.undesired) {
    refs.push_back(constant(v.values));
    coeffs.push_back(params.lambda_b);
  }
  for (const auto& v : bank.desired) {
    refs.push_back(constant(v.values));
    coeffs.push_back(-params.lambda_g);
  }
  for (const auto& r : refs)
    if (r.value().size() != dim)
      throw ShapeError("concept vector has " + std::to_string(r.value().size()) + " entries, feature maps have " +
                       std::to_string(dim));
  std::vector<Var> terms;
  std::vector<Real> weights;
  if (!refs.empty()) {
    for (std::size_t j = 0; j < shape[0]; ++j) {
      const Var rj = select(feature_maps, j);
      for (std::size_t b = 0; b < refs.size(); ++b) {
        terms.push_back(cosine_similarity(rj, refs[b]));
        weights.push_back(coeffs[b]);
      }
    }
  }
  return weighted_sum(terms, weights);
}

namespace {

void merge_into(std::vector<ConceptVector>& out, const std::vector<ConceptVector>& fresh) {
  for (const auto& nv : fresh) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ConceptVector& o) { return o.concept_name == nv.concept_name; });
    if (it == out.end()) {
      out.push_back(nv);
      continue;
    }
    if (it->values.size() != nv.values.size())
      throw ShapeError("recalibrate: concept '" + nv.concept_name + "' changed dimension");
    for (std::size_t p = 0; p < nv.values.size(); ++p) it->values[p] = (it->values[p] + nv.values[p]) / 2;
    it->filters = nv.filters;
  }
}

}  // namespace

ConceptBank recalibrate(const ConceptBank& old_bank, const ConceptBank& new_bank) {
  ConceptBank out = old_bank;
  for (const auto& [cls, nb] : new_bank.classes) {
    auto& ob = out.classes[cls];
    merge_into(ob.undesired, nb.undesired);
    merge_into(ob.desired, nb.desired);
  }
  return out;
}

namespace {

RecalibrationRecord snapshot(std::size_t epoch, const Extraction& ex, const ConstraintSet& constraints,
                             const CnnModel& model, const Dataset& eval, std::size_t fallback,
                             const ConceptBank& bank) {
  RecalibrationRecord rec;
  rec.epoch = epoch;
  rec.metrics = evaluate_ruleset(ex.rules, ex.labels, constraints, model, ex.thresholds, ex.table, eval, fallback);
  rec.bank_vectors = bank.vector_count();
  const auto names = ex.labels.names();
  rec.ruleset = print_ruleset(ex.rules, &names);
  return rec;
}

}  // namespace

CorrectionResult correct_bias(const CnnModel& model, const Dataset& train_data, const ConstraintSet& constraints,
                              const CorrectionConfig& config, const ExtractionParams& extraction,
                              const TrainConfig& train_config, const Dataset* validation) {
  config.validate();
  constraints.validate();
  const std::size_t fallback = train_data.majority_class();
  const Dataset& eval = validation ? *validation : train_data;

  CorrectionResult result;
  result.model = model;
  result.initial = extract_ruleset(model, train_data, extraction);
  result.bank = build_concept_bank(constraints, result.initial.rules, result.initial.labels, model, train_data,
                                   result.initial.norms, config.top_images);
  if (result.bank.empty() && !constraints.empty())
    std::cerr << "warning: no constrained concept appears in the rule-set; training with cross-entropy only\n";
  result.snapshots.push_back(
      snapshot(0, result.initial, constraints, model, eval, fallback, result.bank));

  ConceptBank& bank = result.bank;
  const auto& classes = train_data.class_names;
  const LossParams loss = config.loss;
  AuxLoss aux = [&bank, &classes, loss](const Var& maps, const Sample& s) {
    const ClassBank* cb = bank.find(classes.at(s.label));
    if (!cb) return weighted_sum({}, {});
    return semantic_similarity_loss(maps, *cb, loss);
  };

  EpochHook hook = [&](std::size_t epoch, const CnnModel& current) {
    if (epoch % config.recalibrate_every != 0 || epoch == config.epochs) return;
    const auto ex = extract_ruleset(current, train_data, extraction);
    const auto fresh = build_concept_bank(constraints, ex.rules, ex.labels, current, train_data, ex.norms,
                                          config.top_images);
    bank = recalibrate(bank, fresh);
    result.snapshots.push_back(snapshot(epoch, ex, constraints, current, eval, fallback, bank));
  };

  TrainConfig tc = train_config;
  tc.epochs = config.epochs;
  result.epochs = train(result.model, train_data, tc, aux, validation, hook);

  result.final = extract_ruleset(result.model, train_data, extraction);
  result.snapshots.push_back(
      snapshot(config.epochs, result.final, constraints, result.model, eval, fallback, bank));
  return result;
}

void write_history_csv(const CorrectionResult& result, std::ostream& out) {
  out << "epoch,ce_loss,ss_loss,train_acc,validation_loss,learning_rate,"
         "fidelity,accuracy,predicates,size,pct_undesired,pct_desired,coverage\n";
  out << std::setprecision(8);
  auto metrics = [&](std::size_t epoch) {
    for (const auto& s : result.snapshots)
      if (s.epoch == epoch) {
        const auto& m = s.metrics;
        out << m.fidelity << ',' << m.accuracy << ',' << m.predicates << ',' << m.size << ',' << m.pct_undesired
            << ',' << m.pct_desired << ',' << m.coverage;
        return;
      }
    out << ",,,,,,";
  };
  out << "0,,,,,,";
  metrics(0);
  out << '\n';
  for (const auto& e : result.epochs) {
    out << e.epoch << ',' << e.ce_loss << ',' << e.aux_loss << ',' << e.train_accuracy << ',' << e.validation_loss
        << ',' << e.learning_rate << ',';
    metrics(e.epoch);
    out << '\n';
  }
}

}  // namespace nesybicor
