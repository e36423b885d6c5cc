#include "nesybicor/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nesybicor/experiment.hpp"

namespace nesybicor {

namespace pt = boost::property_tree;

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  cnn.seed = value;
  train.seed = value;
}

void RunConfig::validate() const {
  try {
    cnn.validate();
    train.validate(cnn.classes);
    correction.validate();
    extraction.labels.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (train_split.empty()) throw ConfigError("data.train_split must not be empty");
  if (!(correction_learning_rate > 0)) throw ConfigError("correction.learning_rate must be positive");
  if (!(extraction.fold.ratio >= 0)) throw ConfigError("fold.ratio must be non-negative");
}

RunConfig default_run_config() {
  const auto s = default_experiment_settings(1);
  RunConfig c;
  c.cnn = s.cnn;
  c.train = s.train;
  c.extraction = s.extraction;
  c.correction = s.correction;
  c.correction_learning_rate = s.correction_learning_rate;
  c.apply_seed(1);
  return c;
}

namespace {

// shortest text that reads back to the same double
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::string join(const std::vector<Real>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (text.find_first_not_of(" \t") == std::string::npos) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string{} : item.substr(b, e - b + 1));
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  errno = 0;
  const auto x = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": value out of range");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto sz = [](auto get) {
      return [get](RunConfig& c, const std::string& k, const std::string& v) {
        get(c) = static_cast<std::size_t>(to_u64(k, v));
      };
    };
    auto dbl = [](auto get) {
      return [get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = to_double(k, v); };
    };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.apply_seed(to_u64(k, v)); };
    t["data.root"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = v; };
    t["data.train_split"] = [](RunConfig& c, const std::string&, const std::string& v) { c.train_split = v; };
    t["data.validation_split"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.validation_split = v;
    };
    t["gen.train"] = sz([](RunConfig& c) -> std::size_t& { return c.gen.train; });
    t["gen.validation"] = sz([](RunConfig& c) -> std::size_t& { return c.gen.validation; });
    t["gen.test"] = sz([](RunConfig& c) -> std::size_t& { return c.gen.test; });
    t["gen.test_matched"] = sz([](RunConfig& c) -> std::size_t& { return c.gen.matched_test; });
    t["cnn.input_size"] = sz([](RunConfig& c) -> std::size_t& { return c.cnn.input_size; });
    t["cnn.channels"] = sz([](RunConfig& c) -> std::size_t& { return c.cnn.channels; });
    t["cnn.filters"] = sz([](RunConfig& c) -> std::size_t& { return c.cnn.filters; });
    t["cnn.classes"] = sz([](RunConfig& c) -> std::size_t& { return c.cnn.classes; });
    t["cnn.blocks"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.cnn.blocks.clear();
      for (const auto& item : split_list(v)) c.cnn.blocks.push_back(static_cast<std::size_t>(to_u64(k, item)));
    };
    t["cnn.head"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "gap") c.cnn.head = HeadKind::GlobalAverage;
      else if (v == "flatten") c.cnn.head = HeadKind::Flatten;
      else throw ConfigError(k + ": expected gap or flatten, got '" + v + "'");
    };
    t["train.epochs"] = sz([](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    t["train.batch_size"] = sz([](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    t["train.patience"] = sz([](RunConfig& c) -> std::size_t& { return c.train.patience; });
    t["train.threads"] = sz([](RunConfig& c) -> std::size_t& { return c.train.threads; });
    t["train.learning_rate"] = dbl([](RunConfig& c) -> Real& { return c.train.learning_rate; });
    t["train.l2"] = dbl([](RunConfig& c) -> Real& { return c.train.l2; });
    t["train.decay_factor"] = dbl([](RunConfig& c) -> Real& { return c.train.decay_factor; });
    t["train.class_weights"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.class_weights.clear();
      for (const auto& item : split_list(v)) c.train.class_weights.push_back(to_double(k, item));
    };
    t["binarizer.alpha"] = dbl([](RunConfig& c) -> Real& { return c.extraction.binarizer.alpha; });
    t["binarizer.gamma"] = dbl([](RunConfig& c) -> Real& { return c.extraction.binarizer.gamma; });
    t["fold.ratio"] = dbl([](RunConfig& c) -> double& { return c.extraction.fold.ratio; });
    t["fold.tail"] = sz([](RunConfig& c) -> std::size_t& { return c.extraction.fold.tail; });
    t["fold.max_exception_depth"] =
        sz([](RunConfig& c) -> std::size_t& { return c.extraction.fold.max_exception_depth; });
    t["labels.top_m"] = sz([](RunConfig& c) -> std::size_t& { return c.extraction.labels.top_m; });
    t["labels.percentile"] = dbl([](RunConfig& c) -> double& { return c.extraction.labels.percentile; });
    t["labels.beta"] = dbl([](RunConfig& c) -> double& { return c.extraction.labels.beta; });
    t["labels.ignore_background"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.extraction.labels.ignore_background = to_bool(k, v);
    };
    t["correction.epochs"] = sz([](RunConfig& c) -> std::size_t& { return c.correction.epochs; });
    t["correction.recalibrate_every"] =
        sz([](RunConfig& c) -> std::size_t& { return c.correction.recalibrate_every; });
    t["correction.top_images"] = sz([](RunConfig& c) -> std::size_t& { return c.correction.top_images; });
    t["correction.lambda_b"] = dbl([](RunConfig& c) -> Real& { return c.correction.loss.lambda_b; });
    t["correction.lambda_g"] = dbl([](RunConfig& c) -> Real& { return c.correction.loss.lambda_g; });
    t["correction.learning_rate"] = dbl([](RunConfig& c) -> double& { return c.correction_learning_rate; });
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& ini_text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c = default_run_config();
  // the seed is applied first so explicit cnn/train settings are not overwritten by it
  if (auto s = tree.get_optional<std::string>("seed")) setters().at("seed")(c, "seed", *s);
  const auto& table = setters();
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name != "seed") throw ConfigError("unknown config key '" + name + "'");
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const std::string full = name + "." + key;
      auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown config key '" + full + "'");
      it->second(c, full, leaf.data());
    }
  }
  if (!c.data_root.empty() && c.data_root.is_relative() && !base_dir.empty()) c.data_root = base_dir / c.data_root;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string run_config_to_ini(const RunConfig& c) {
  std::ostringstream o;
  o << "seed = " << c.seed << "\n";
  o << "\n[data]\nroot = " << c.data_root.string() << "\ntrain_split = " << c.train_split
    << "\nvalidation_split = " << c.validation_split << "\n";
  o << "\n[gen]\ntrain = " << c.gen.train << "\nvalidation = " << c.gen.validation << "\ntest = " << c.gen.test
    << "\ntest_matched = " << c.gen.matched_test << "\n";
  o << "\n[cnn]\ninput_size = " << c.cnn.input_size << "\nchannels = " << c.cnn.channels
    << "\nblocks = " << join(c.cnn.blocks) << "\nfilters = " << c.cnn.filters << "\nclasses = " << c.cnn.classes
    << "\nhead = " << (c.cnn.head == HeadKind::GlobalAverage ? "gap" : "flatten") << "\n";
  o << "\n[train]\nepochs = " << c.train.epochs << "\nbatch_size = " << c.train.batch_size
    << "\nlearning_rate = " << fmt(c.train.learning_rate) << "\nl2 = " << fmt(c.train.l2)
    << "\ndecay_factor = " << fmt(c.train.decay_factor) << "\npatience = " << c.train.patience
    << "\nthreads = " << c.train.threads << "\nclass_weights = " << join(c.train.class_weights) << "\n";
  o << "\n[binarizer]\nalpha = " << fmt(c.extraction.binarizer.alpha)
    << "\ngamma = " << fmt(c.extraction.binarizer.gamma) << "\n";
  o << "\n[fold]\nratio = " << fmt(c.extraction.fold.ratio) << "\ntail = " << fmt(c.extraction.fold.tail)
    << "\nmax_exception_depth = " << c.extraction.fold.max_exception_depth << "\n";
  o << "\n[labels]\ntop_m = " << c.extraction.labels.top_m << "\npercentile = " << fmt(c.extraction.labels.percentile)
    << "\nbeta = " << fmt(c.extraction.labels.beta)
    << "\nignore_background = " << (c.extraction.labels.ignore_background ? "true" : "false") << "\n";
  o << "\n[correction]\nepochs = " << c.correction.epochs << "\nrecalibrate_every = " << c.correction.recalibrate_every
    << "\nlambda_b = " << fmt(c.correction.loss.lambda_b) << "\nlambda_g = " << fmt(c.correction.loss.lambda_g)
    << "\ntop_images = " << c.correction.top_images << "\nlearning_rate = " << fmt(c.correction_learning_rate)
    << "\n";
  return o.str();
}

}  // namespace nesybicor
