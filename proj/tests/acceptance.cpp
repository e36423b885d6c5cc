// Acceptance runner: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status is non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "checks.hpp"
#include "grad_suite.hpp"
#include "nesybicor/experiment.hpp"

using namespace nesybicor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- 1

checks::Result gradients(std::size_t seeds) {
  constexpr double tol = 1e-4, budget = 60;
  checks::Result r;
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_op;
  for (std::size_t s = 1; s <= seeds; ++s)
    for (const auto& [op, err] : gradsuite::run(s))
      if (err > worst) worst = err, worst_op = op;
  const double secs = seconds_since(t0);
  if (worst >= tol) r.fail("max relative error " + sci(worst) + " in " + worst_op);
  if (secs >= budget) r.fail("took " + fixed(secs, 1) + " s");
  r.detail = (r.pass ? "" : r.detail + "; ") + std::to_string(seeds) + " seeds, max rel err " + sci(worst) +
             " (" + worst_op + "), " + fixed(secs, 1) + " s";
  return r;
}

// ---- 5

struct SeedOutcome {
  std::uint64_t seed;
  ExperimentResult res;
};

checks::Result experiment(std::size_t seeds) {
  constexpr double relative_drop = 0.5, max_matched_drop = 0.05, budget = 15 * 60;
  checks::Result r;
  const auto t0 = Clock::now();
  std::vector<SeedOutcome> runs;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    runs.push_back({s, run_bias_experiment(s, default_experiment_settings(s))});
    const auto& e = runs.back().res;
    std::cerr << "  seed " << s << " (" << fixed(e.seconds, 0) << " s)\n";
    for (const auto* rep : {&e.initial, &e.corrected}) {
      std::cerr << "    " << (rep == &e.initial ? "initial  " : "corrected") << " undesired "
                << fixed(rep->train.pct_undesired) << " desired " << fixed(rep->train.pct_desired) << " pred "
                << rep->train.predicates << " size " << rep->train.size << " matched "
                << fixed(rep->matched_accuracy) << " shifted " << fixed(rep->shifted_accuracy) << '\n';
      std::istringstream lines(rep->ruleset);
      for (std::string line; std::getline(lines, line);) std::cerr << "      " << line << '\n';
    }
  }
  const double secs = seconds_since(t0);

  std::size_t a = 0, b = 0, d = 0;
  double drop_sum = 0, drop_max = -1;
  for (const auto& [seed, e] : runs) {
    const double u0 = e.initial.train.pct_undesired, u1 = e.corrected.train.pct_undesired;
    a += u0 > 0 && u1 <= (1 - relative_drop) * u0;
    b += e.corrected.train.predicates <= e.initial.train.predicates && e.corrected.train.size <= e.initial.train.size;
    d += e.corrected.shifted_accuracy >= e.initial.shifted_accuracy;
    const double drop = e.initial.matched_accuracy - e.corrected.matched_accuracy;
    drop_sum += drop;
    drop_max = std::max(drop_max, drop);
  }
  const double drop_mean = drop_sum / static_cast<double>(runs.size());
  const std::size_t need = seeds - 1;  // 4 of 5
  if (a < need) r.fail("(a) undesired halved in " + std::to_string(a) + "/" + std::to_string(seeds));
  if (b < need) r.fail("(b) predicates and size kept in " + std::to_string(b) + "/" + std::to_string(seeds));
  if (drop_mean > max_matched_drop) r.fail("(c) mean matched-accuracy drop " + fixed(100 * drop_mean, 1) + " pp");
  if (d < (seeds + 1) / 2) r.fail("(d) shifted accuracy held in " + std::to_string(d) + "/" + std::to_string(seeds));
  if (secs >= budget) r.fail("took " + fixed(secs, 0) + " s");
  const std::string summary = "(a) " + std::to_string(a) + "/" + std::to_string(seeds) + " (b) " + std::to_string(b) +
                              "/" + std::to_string(seeds) + " (c) mean drop " + fixed(100 * drop_mean, 1) +
                              " pp, max " + fixed(100 * drop_max, 1) + " pp (d) " + std::to_string(d) + "/" +
                              std::to_string(seeds) + ", " + fixed(secs, 0) + " s";
  r.detail = r.pass ? summary : r.detail + "; " + summary;
  return r;
}

// ---- 7

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void run_cli(const std::string& cmd) {
  if (std::system((cmd + " >/dev/null 2>&1").c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// gen, train, extract, correct, eval into `dir`; returns the compared artefacts.
std::vector<std::pair<std::string, std::string>> pipeline(const fs::path& cli, const fs::path& config,
                                                          const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string bin = q(cli);
  run_cli(bin + " gen --config " + q(config) + " --out " + q(dir / "gen"));
  const fs::path cfg = dir / "gen" / "config.ini";
  run_cli(bin + " train --config " + q(cfg) + " --out " + q(dir / "train"));
  run_cli(bin + " extract --config " + q(cfg) + " --checkpoint " + q(dir / "train" / "model.ckpt") + " --out " +
          q(dir / "extract"));
  run_cli(bin + " correct --config " + q(cfg) + " --checkpoint " + q(dir / "train" / "model.ckpt") +
          " --constraints " + q(dir / "gen" / "constraints.json") + " --out " + q(dir / "correct"));
  run_cli(bin + " eval --config " + q(cfg) + " --constraints " + q(dir / "gen" / "constraints.json") + " --out " +
          q(dir / "eval") + " " + q(dir / "extract") + " " + q(dir / "correct"));
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* f : {"extract/ruleset.txt", "extract/ruleset_raw.txt", "correct/initial/ruleset.txt",
                        "correct/final/ruleset.txt", "correct/history.csv", "eval/metrics.csv"})
    out.emplace_back(f, slurp(dir / f));
  return out;
}

checks::Result reproducibility(const fs::path& cli, const fs::path& config, const fs::path& work) {
  checks::Result r;
  try {
    const auto first = pipeline(cli, config, work / "first");
    const auto second = pipeline(cli, config, work / "second");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (first[i].second != second[i].second) r.fail(first[i].first + " differs between runs");
    if (r.pass) r.detail = std::to_string(first.size()) + " artefacts byte-identical";
    fs::remove_all(work);
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli, fixtures, work = (fs::temp_directory_path() / "nesybicor_acceptance").string();
  std::set<int> only;
  std::size_t experiment_seeds = 5;
  app.add_option("--cli", cli, "nesybicor executable")->required();
  app.add_option("--fixtures", fixtures, "test fixture directory")->required();
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "criteria to run (default all)");
  app.add_option("--experiment-seeds", experiment_seeds, "seeds for criterion 5");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<checks::Result()>>> criteria{
      {"gradient suite", [] { return gradients(100); }},
      {"binarizer oracle", [] { return checks::binarizer(1000, 2024); }},
      {"rule induction oracle",
       [] {
         std::size_t tables = 0;
         auto r = checks::induction(1000, 1000, 2024, &tables);
         if (r.pass) r.detail = std::to_string(tables) + " oracle tables exact, 1000 fuzz runs clean";
         return r;
       }},
      {"appendix rule-sets",
       [&] {
         auto r = checks::appendix(fs::path(fixtures) / "appendix");
         if (r.pass) r.detail = std::to_string(checks::appendix_names().size()) + " rule-sets";
         return r;
       }},
      {"bias-correction experiment", [&] { return experiment(experiment_seeds); }},
      {"metric identities",
       [] {
         auto r = checks::metric_fixtures();
         const auto f = checks::fidelity_identity();
         if (!f.pass) r.fail(f.detail);
         return r;
       }},
      {"pipeline reproducibility",
       [&] { return reproducibility(cli, fs::path(fixtures) / "cli" / "small.ini", work); }},
  };

  bool ok = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    checks::Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.fail(std::string("exception: ") + e.what());
    }
    ok &= r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << n << ". " << criteria[i].first
              << (r.detail.empty() ? "" : "  [" + r.detail + "]") << std::endl;
  }
  return ok ? 0 : 1;
}
