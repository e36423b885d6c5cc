// nesybicor: gen / train / extract / correct / eval / bench.
//
// Every command stages its outputs in <out>/.staging and moves them into
// place only after all of them were written.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nesybicor/experiment.hpp"
#include "nesybicor/image_io.hpp"
#include "nesybicor/run_config.hpp"

namespace fs = std::filesystem;
using namespace nesybicor;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(what + ": cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)), dir_(out_ / ".staging") {
    fs::create_directories(out_);
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  fs::path path(const fs::path& rel) const {
    auto p = dir_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  void write(const fs::path& rel, const std::function<void(std::ostream&)>& fill) {
    std::ofstream out(path(rel), std::ios::binary);
    fill(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + (out_ / rel).string());
  }
  void write(const fs::path& rel, const std::string& text) {
    write(rel, [&](std::ostream& o) { o << text; });
  }

  void commit() {
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const auto target = out_ / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c, bool need_data) {
  RunConfig rc = c.config.empty() ? default_run_config() : load_run_config(c.config);
  if (c.seed) rc.apply_seed(*c.seed);
  if (need_data) {
    if (rc.data_root.empty()) throw UsageError("data.root: not set in the config");
    if (!fs::is_directory(rc.data_root)) throw UsageError("data.root: no directory " + rc.data_root.string());
  }
  return rc;
}

Dataset load_split(const RunConfig& rc, const std::string& split, const std::string& field) {
  Split s;
  try {
    s = parse_split(split);
  } catch (const std::exception& e) {
    throw UsageError(field + ": " + e.what());
  }
  if (!fs::is_directory(rc.data_root / split_name(s)))
    throw UsageError(field + ": split '" + split + "' missing under " + rc.data_root.string());
  Dataset d = load_dataset(rc.data_root, s);
  if (d.empty()) throw UsageError(field + ": split '" + split + "' has no images");
  if (d.class_count() != rc.cnn.classes)
    throw UsageError("cnn.classes: config says " + std::to_string(rc.cnn.classes) + " but the dataset has " +
                     std::to_string(d.class_count()));
  return d;
}

std::optional<Dataset> load_validation(const RunConfig& rc) {
  if (rc.validation_split.empty()) return std::nullopt;
  return load_split(rc, rc.validation_split, "data.validation_split");
}

CnnModel load_model(const std::string& path, const RunConfig& rc) {
  if (path.empty()) throw UsageError("--checkpoint: required");
  if (!fs::exists(path)) throw UsageError("--checkpoint: no file " + path);
  CnnModel m = load_checkpoint(path);
  if (m.config.classes != rc.cnn.classes)
    throw UsageError("--checkpoint: model has " + std::to_string(m.config.classes) + " classes, config expects " +
                     std::to_string(rc.cnn.classes));
  return m;
}

ConstraintSet load_constraints(const std::string& path) {
  if (path.empty()) throw UsageError("--constraints: required");
  ConstraintSet c = parse_constraints(read_file(path, "--constraints"));
  c.validate();
  return c;
}

void write_thresholds(const Thresholds& t, std::ostream& out) {
  out << "filter,threshold\n";
  for (std::size_t k = 0; k < t.size(); ++k) out << filter_predicate(k) << ',' << fmt(t[k]) << '\n';
}

Thresholds read_thresholds(const fs::path& path, std::size_t filters) {
  std::istringstream in(read_file(path, "thresholds"));
  std::string line;
  std::getline(in, line);
  if (line != "filter,threshold") throw UsageError(path.string() + ": bad header");
  Thresholds t(filters, 0);
  std::vector<bool> seen(filters, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const auto k = parse_filter_predicate(line.substr(0, comma));
    if (comma == std::string::npos || !k || *k >= filters) throw UsageError(path.string() + ": bad row '" + line + "'");
    t[*k] = std::stod(line.substr(comma + 1));
    seen[*k] = true;
  }
  for (std::size_t k = 0; k < filters; ++k)
    if (!seen[k]) throw UsageError(path.string() + ": no threshold for " + filter_predicate(k));
  return t;
}

void write_epochs(const std::vector<EpochRecord>& epochs, std::ostream& out) {
  out << "epoch,ce_loss,aux_loss,l2_loss,train_acc,validation_loss,learning_rate\n" << std::setprecision(8);
  for (const auto& e : epochs)
    out << e.epoch << ',' << e.ce_loss << ',' << e.aux_loss << ',' << e.l2_loss << ',' << e.train_accuracy << ','
        << e.validation_loss << ',' << e.learning_rate << '\n';
}

/// extract-style artifact directory: model, thresholds, labels, table, both rule-set texts.
void stage_extraction(Staging& st, const fs::path& dir, const CnnModel& model, const Extraction& ex) {
  save_checkpoint(model, st.path(dir / "model.ckpt"));
  const auto names = ex.labels.names();
  st.write(dir / "ruleset.txt", print_ruleset(ex.rules, &names));
  st.write(dir / "ruleset_raw.txt", print_ruleset(ex.rules));
  st.write(dir / "thresholds.csv", [&](std::ostream& o) { write_thresholds(ex.thresholds, o); });
  st.write(dir / "labels.csv", [&](std::ostream& o) { write_labels_csv(ex.labels, o); });
  st.write(dir / "binarization.csv", [&](std::ostream& o) { write_binarization_csv(ex.table, o); });
}

int cmd_gen(const Common& c, const std::string& spec_path, const std::string& constraints_path) {
  const RunConfig rc = load_config(c, false);
  SceneSpec spec = spec_path.empty() ? benchmark_spec(rc.seed) : parse_scene_spec(read_file(spec_path, "--spec"));
  spec.seed = rc.seed;
  spec.validate();
  ConstraintSet constraints =
      !constraints_path.empty() ? load_constraints(constraints_path)
                                : (spec_path.empty() ? benchmark_constraints() : ConstraintSet{});

  Staging st(c.out);
  const fs::path data = st.path("data");
  fs::create_directories(data);
  const std::pair<Split, std::size_t> splits[] = {{Split::Train, rc.gen.train},
                                                  {Split::Validation, rc.gen.validation},
                                                  {Split::Test, rc.gen.test},
                                                  {Split::MatchedTest, rc.gen.matched_test}};
  for (const auto& [split, count] : splits)
    if (count > 0) save_dataset(generate(spec, count, split), data);
  st.write("spec.json", scene_spec_to_json(spec));
  if (!constraints.empty()) st.write("constraints.json", constraints_to_json(constraints));
  RunConfig echo = rc;
  echo.data_root = "data";
  st.write("config.ini", run_config_to_ini(echo));
  st.commit();
  return 0;
}

int cmd_train(const Common& c) {
  const RunConfig rc = load_config(c, true);
  const Dataset train_data = load_split(rc, rc.train_split, "data.train_split");
  const auto validation = load_validation(rc);
  CnnModel model = build_model(rc.cnn);
  const auto history = train(model, train_data, rc.train, {}, validation ? &*validation : nullptr);

  Staging st(c.out);
  save_checkpoint(model, st.path("model.ckpt"));
  st.write("history.csv", [&](std::ostream& o) { write_epochs(history, o); });
  st.write("config.ini", run_config_to_ini(rc));
  st.commit();
  const auto& last = history.back();
  std::cerr << "trained " << history.size() << " epochs, train accuracy " << last.train_accuracy
            << ", validation loss " << last.validation_loss << "\n";
  return 0;
}

int cmd_extract(const Common& c, const std::string& checkpoint) {
  const RunConfig rc = load_config(c, true);
  const CnnModel model = load_model(checkpoint, rc);
  const Dataset train_data = load_split(rc, rc.train_split, "data.train_split");
  const Extraction ex = extract_ruleset(model, train_data, rc.extraction);

  Staging st(c.out);
  stage_extraction(st, ".", model, ex);
  st.write("config.ini", run_config_to_ini(rc));
  st.commit();
  const auto names = ex.labels.names();
  std::cout << print_ruleset(ex.rules, &names);
  return 0;
}

int cmd_correct(const Common& c, const std::string& checkpoint, const std::string& constraints_path) {
  const RunConfig rc = load_config(c, true);
  const CnnModel model = load_model(checkpoint, rc);
  const ConstraintSet constraints = load_constraints(constraints_path);
  const Dataset train_data = load_split(rc, rc.train_split, "data.train_split");
  const auto validation = load_validation(rc);
  TrainConfig tc = rc.train;
  tc.learning_rate = rc.correction_learning_rate;
  const auto result = correct_bias(model, train_data, constraints, rc.correction, rc.extraction, tc,
                                   validation ? &*validation : nullptr);

  Staging st(c.out);
  // the final artifacts come from the stored (float32) checkpoint so that eval sees the same model
  const fs::path ckpt = st.path("model.ckpt");
  save_checkpoint(result.model, ckpt);
  const CnnModel stored = load_checkpoint(ckpt);
  const Extraction final_ex = extract_ruleset(stored, train_data, rc.extraction);
  stage_extraction(st, "initial", model, result.initial);
  stage_extraction(st, "final", stored, final_ex);
  st.write("history.csv", [&](std::ostream& o) { write_history_csv(result, o); });
  st.write("snapshots.txt", [&](std::ostream& o) {
    for (const auto& s : result.snapshots)
      o << "% epoch " << s.epoch << ", " << s.bank_vectors << " bank vectors\n" << s.ruleset << "\n";
  });
  st.write("constraints.json", constraints_to_json(constraints));
  st.write("config.ini", run_config_to_ini(rc));
  st.commit();
  const auto names = final_ex.labels.names();
  std::cout << print_ruleset(final_ex.rules, &names);
  return 0;
}

struct EvalRun {
  std::string name;
  CnnModel model;
  RuleSet rules;
  LabelMap labels;
  Thresholds thresholds;
};

EvalRun load_run_dir(const fs::path& dir, const RunConfig& rc) {
  if (!fs::is_directory(dir)) throw UsageError("eval: no run directory " + dir.string());
  EvalRun r;
  r.name = dir.filename().string();
  if (r.name.empty() || r.name == ".") r.name = fs::absolute(dir).parent_path().filename().string();
  r.model = load_model((dir / "model.ckpt").string(), rc);
  r.rules = parse_ruleset(read_file(dir / "ruleset.txt", "eval"));
  std::istringstream labels(read_file(dir / "labels.csv", "eval"));
  r.labels = read_labels_csv(labels);
  r.thresholds = read_thresholds(dir / "thresholds.csv", r.model.config.filters);
  return r;
}

std::string format_ruleset_block(const std::string& title, const std::string& text) {
  return "== " + title + "\n" + text + "\n";
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& ruleset_path,
             const std::string& labels_path, const std::string& thresholds_path, const std::string& constraints_path,
             const std::vector<std::string>& run_dirs) {
  const RunConfig rc = load_config(c, true);
  const ConstraintSet constraints = load_constraints(constraints_path);
  const Dataset train_data = load_split(rc, rc.train_split, "data.train_split");
  const std::size_t fallback = train_data.majority_class();

  std::vector<EvalRun> runs;
  for (const fs::path d : run_dirs) {
    // a correct run holds its before/after extractions in subdirectories
    if (!fs::exists(d / "ruleset.txt") && fs::is_directory(d / "initial") && fs::is_directory(d / "final")) {
      const std::string base = fs::absolute(d).lexically_normal().filename().string();
      for (const char* stage : {"initial", "final"}) {
        runs.push_back(load_run_dir(d / stage, rc));
        runs.back().name = base + "/" + stage;
      }
      continue;
    }
    runs.push_back(load_run_dir(d, rc));
  }
  if (!ruleset_path.empty()) {
    EvalRun r;
    r.name = fs::path(ruleset_path).stem().string();
    r.model = load_model(checkpoint, rc);
    r.rules = parse_ruleset(read_file(ruleset_path, "--ruleset"));
    if (!labels_path.empty()) {
      std::istringstream in(read_file(labels_path, "--labels"));
      r.labels = read_labels_csv(in);
    }
    r.thresholds = thresholds_path.empty()
                       ? compute_thresholds(build_norm_table(r.model, train_data), rc.extraction.binarizer)
                       : read_thresholds(thresholds_path, r.model.config.filters);
    runs.push_back(std::move(r));
  }
  if (runs.empty()) throw UsageError("eval: give run directories or --ruleset");

  std::vector<std::pair<std::string, Dataset>> splits;
  splits.emplace_back(split_name(parse_split(rc.train_split)), train_data);
  for (Split s : {Split::MatchedTest, Split::Test})
    if (split_name(s) != rc.train_split && fs::is_directory(rc.data_root / split_name(s)))
      splits.emplace_back(split_name(s), load_dataset(rc.data_root, s));

  std::vector<std::vector<MetricsRecord>> table(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    auto& run = runs[r];
    validate_ruleset(run.rules);
    const auto bin = binarize(build_norm_table(run.model, train_data), run.thresholds, train_data.class_names);
    for (const auto& [name, data] : splits)
      table[r].push_back(evaluate_ruleset(run.rules, run.labels, constraints, run.model, run.thresholds, bin, data,
                                          fallback));
  }

  Staging st(c.out);
  st.write("metrics.csv", [&](std::ostream& o) {
    o << "run,split,";
    write_metrics_csv_header(o);
    for (std::size_t r = 0; r < runs.size(); ++r)
      for (std::size_t s = 0; s < splits.size(); ++s) {
        o << runs[r].name << ',' << splits[s].first << ',';
        write_metrics_csv_row(table[r][s], o);
      }
  });
  st.write("report.txt", [&](std::ostream& o) {
    const std::size_t a = 0, b = runs.size() - 1;
    o << "metric (split)";
    o << std::string(24 - 14, ' ') << std::setw(14) << runs[a].name << std::setw(14) << runs[b].name << "\n";
    o << std::fixed << std::setprecision(4);
    for (std::size_t s = 0; s < splits.size(); ++s) {
      const auto& x = table[a][s];
      const auto& y = table[b][s];
      auto line = [&](const std::string& metric, double u, double v) {
        std::string label = metric + " (" + splits[s].first + ")";
        o << std::left << std::setw(24) << label << std::right << std::setw(14) << u << std::setw(14) << v << "\n";
      };
      line("fidelity", x.fidelity, y.fidelity);
      line("accuracy", x.accuracy, y.accuracy);
      if (s == 0) {
        line("predicates", static_cast<double>(x.predicates), static_cast<double>(y.predicates));
        line("size", static_cast<double>(x.size), static_cast<double>(y.size));
        line("pct_undesired", x.pct_undesired, y.pct_undesired);
        line("pct_desired", x.pct_desired, y.pct_desired);
        line("coverage", x.coverage, y.coverage);
      }
    }
    o << "\n";
    for (std::size_t r : {a, b}) {
      o << format_ruleset_block(runs[r].name, print_ruleset(runs[r].rules));
      if (a == b) break;
    }
  });
  st.write("config.ini", run_config_to_ini(rc));
  st.commit();
  std::cout << read_file(fs::path(c.out) / "report.txt", "report");
  return 0;
}

int cmd_bench(const Common& c, std::size_t seeds, std::uint64_t first) {
  const RunConfig rc = load_config(c, false);
  Staging st(c.out);
  std::ostringstream csv, rules;
  std::ostringstream header;
  write_metrics_csv_header(header);
  std::string columns = header.str();
  columns.pop_back();
  csv << "seed,stage," << columns << ",matched_accuracy,shifted_accuracy,cnn_matched_accuracy,cnn_shifted_accuracy\n" << std::setprecision(6);
  for (std::uint64_t seed = first; seed < first + seeds; ++seed) {
    ExperimentSettings s = default_experiment_settings(seed);
    if (!c.config.empty()) {
      s.cnn = rc.cnn;
      s.train = rc.train;
      s.extraction = rc.extraction;
      s.correction = rc.correction;
      s.correction_learning_rate = rc.correction_learning_rate;
      s.cnn.seed = s.train.seed = seed;
    }
    const auto r = run_bias_experiment(seed, s, [&](const std::string& m) {
      std::cerr << "seed " << seed << ": " << m << "\n";
    });
    for (const auto& [stage, rep] : {std::pair{"initial", &r.initial}, std::pair{"corrected", &r.corrected}}) {
      csv << seed << ',' << stage << ',';
      std::ostringstream row;
      write_metrics_csv_row(rep->train, row);
      std::string line = row.str();
      line.pop_back();
      csv << line << ',' << rep->matched_accuracy << ',' << rep->shifted_accuracy << ',' << rep->cnn_matched_accuracy
          << ',' << rep->cnn_shifted_accuracy << '\n';
      rules << "% seed " << seed << " " << stage << "\n" << rep->ruleset << "\n";
    }
  }
  st.write("bench.csv", csv.str());
  st.write("rulesets.txt", rules.str());
  st.write("config.ini", run_config_to_ini(rc));
  st.commit();
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neurosymbolic bias correction for small CNNs"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config, "run configuration (INI)")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--seed", common.seed, "overrides the config seed");
  };

  std::string spec, checkpoint, constraints, ruleset, labels, thresholds;
  std::vector<std::string> runs;
  std::size_t seeds = 5;
  std::uint64_t first_seed = 1;

  auto* gen = app.add_subcommand("gen", "render a synthetic dataset");
  add_common(gen, false);
  gen->add_option("--spec", spec, "scene spec JSON; the built-in benchmark when omitted")->check(CLI::ExistingFile);
  gen->add_option("--constraints", constraints, "constraints JSON copied next to the data")->check(CLI::ExistingFile);

  auto* trn = app.add_subcommand("train", "train a CNN");
  add_common(trn, true);

  auto* ext = app.add_subcommand("extract", "extract and label a rule-set");
  add_common(ext, true);
  ext->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* cor = app.add_subcommand("correct", "retrain with the semantic similarity loss");
  add_common(cor, true);
  cor->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  cor->add_option("--constraints", constraints, "constraints JSON")->required();

  auto* evl = app.add_subcommand("eval", "score rule-sets and compare before/after");
  add_common(evl, true);
  evl->add_option("--constraints", constraints, "constraints JSON")->required();
  evl->add_option("--checkpoint", checkpoint, "model for --ruleset");
  evl->add_option("--ruleset", ruleset, "rule-set text (raw or labelled)");
  evl->add_option("--labels", labels, "labels CSV for a labelled --ruleset");
  evl->add_option("--thresholds", thresholds, "thresholds CSV; recomputed from the train split when omitted");
  evl->add_option("runs", runs, "run directories written by extract or correct (initial/, final/)");

  auto* bch = app.add_subcommand("bench", "run the synthetic bias-correction experiment over several seeds");
  add_common(bch, false);
  bch->add_option("--seeds", seeds, "number of seeds");
  bch->add_option("--first-seed", first_seed, "first seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(common, spec, constraints);
    if (*trn) return cmd_train(common);
    if (*ext) return cmd_extract(common, checkpoint);
    if (*cor) return cmd_correct(common, checkpoint, constraints);
    if (*evl) return cmd_eval(common, checkpoint, ruleset, labels, thresholds, constraints, runs);
    if (*bch) return cmd_bench(common, seeds, first_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
