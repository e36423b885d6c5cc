#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nesybicor/bias.hpp"
#include "nesybicor/binarizer.hpp"
#include "nesybicor/cnn.hpp"
#include "nesybicor/evaluator.hpp"
#include "nesybicor/fold.hpp"
#include "nesybicor/rules.hpp"
#include "nesybicor/scenegen.hpp"
#include "nesybicor/semlabel.hpp"

namespace py = pybind11;
using namespace nesybicor;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Bits = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<Real>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

NormTable norm_table(const Array& norms) {
  if (norms.ndim() != 2) throw std::invalid_argument("norms must be a 2-D array [images, filters]");
  NormTable t;
  t.rows = static_cast<std::size_t>(norms.shape(0));
  t.filters = static_cast<std::size_t>(norms.shape(1));
  t.values.assign(norms.data(), norms.data() + norms.size());
  t.labels.assign(t.rows, 0);
  return t;
}

BinarizationTable bit_table(const Bits& bits, const std::vector<std::size_t>& labels,
                            const std::vector<std::string>& class_names) {
  if (bits.ndim() != 2) throw std::invalid_argument("bits must be a 2-D array [rows, filters]");
  BinarizationTable t;
  t.rows = static_cast<std::size_t>(bits.shape(0));
  t.columns = filter_columns(static_cast<std::size_t>(bits.shape(1)));
  t.bits.assign(bits.data(), bits.data() + bits.size());
  t.labels = labels;
  t.class_names = class_names;
  if (t.labels.size() != t.rows) throw std::invalid_argument("one label per row expected");
  return t;
}

std::vector<ConceptVector> concept_list(const std::vector<Array>& vs) {
  std::vector<ConceptVector> out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    Tensor t = to_tensor(vs[i]);
    t = t.reshaped({t.size()});
    out.push_back({std::move(t), "c" + std::to_string(i), "", {}});
  }
  return out;
}

py::dict dataset_dict(const Dataset& d) {
  const std::size_t n = d.size();
  const std::size_t h = n ? d.samples[0].image.dim(1) : 0, w = n ? d.samples[0].image.dim(2) : 0;
  Array images(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n), 3, static_cast<py::ssize_t>(h),
                                        static_cast<py::ssize_t>(w)});
  Bits masks(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(h),
                                      static_cast<py::ssize_t>(w)});
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = d.samples[i];
    std::copy(s.image.values().begin(), s.image.values().end(), images.mutable_data() + i * 3 * h * w);
    std::copy(s.mask->ids.begin(), s.mask->ids.end(), masks.mutable_data() + i * h * w);
    labels.push_back(s.label);
    ids.push_back(s.id);
  }
  py::dict out;
  out["images"] = images;
  out["masks"] = masks;
  out["labels"] = labels;
  out["ids"] = ids;
  out["class_names"] = d.class_names;
  out["vocabulary"] = d.vocabulary;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Rule extraction and bias correction for small CNNs";

  py::class_<RuleSet>(m, "RuleSet")
      .def("__str__", [](const RuleSet& rs) { return print_ruleset(rs); })
      .def("__len__", [](const RuleSet& rs) { return rs.rules.size(); })
      .def("__eq__", [](const RuleSet& a, const RuleSet& b) { return a == b; })
      .def("predicates", &RuleSet::predicates)
      .def("target_classes", &RuleSet::target_classes)
      .def("renamed", &rename_predicates, py::arg("names"));

  m.def("parse_ruleset", &parse_ruleset, py::arg("text"));
  m.def("print_ruleset", [](const RuleSet& rs) { return print_ruleset(rs); }, py::arg("ruleset"));
  m.def("stratification_check", &stratification_check);
  m.def("abx_uniqueness_check", &abx_uniqueness_check);
  m.def(
      "classify",
      [](const RuleSet& rs, const std::vector<std::string>& columns, const std::vector<std::uint8_t>& bits) {
        return RuleEvaluator(rs, columns).classify(bits).label;
      },
      py::arg("ruleset"), py::arg("columns"), py::arg("bits"), "class label, or None on abstention");
  m.def(
      "learn_ruleset",
      [](const Bits& bits, const std::vector<std::size_t>& labels, const std::vector<std::string>& class_names,
         double ratio, std::size_t tail, std::size_t max_exception_depth) {
        return learn_ruleset(bit_table(bits, labels, class_names), FoldParams{ratio, tail, max_exception_depth});
      },
      py::arg("bits"), py::arg("labels"), py::arg("class_names"), py::arg("ratio") = 0.5, py::arg("tail") = 0,
      py::arg("max_exception_depth") = 3);

  m.def("feature_norm", [](const Array& map) { return feature_norm(to_tensor(map)); });
  m.def(
      "compute_thresholds",
      [](const Array& norms, double alpha, double gamma) { return compute_thresholds(norm_table(norms), {alpha, gamma}); },
      py::arg("norms"), py::arg("alpha") = 0.6, py::arg("gamma") = 0.7);
  m.def(
      "binarize",
      [](const Array& norms, const std::vector<double>& thresholds) {
        const auto t = binarize(norm_table(norms), thresholds);
        Bits out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(t.rows), static_cast<py::ssize_t>(t.cols())});
        std::copy(t.bits.begin(), t.bits.end(), out.mutable_data());
        return out;
      },
      py::arg("norms"), py::arg("thresholds"));

  m.def(
      "filter_mask",
      [](const Array& map, std::size_t height, std::size_t width, double q) {
        return filter_mask(to_tensor(map), height, width, q);
      },
      py::arg("feature_map"), py::arg("height"), py::arg("width"), py::arg("percentile") = 95.0);
  m.def(
      "iou_scores",
      [](const std::vector<std::uint8_t>& mask, const Bits& seg, const std::vector<std::string>& vocabulary) {
        if (seg.ndim() != 2) throw std::invalid_argument("segmentation must be a 2-D array");
        SegMask s{static_cast<std::size_t>(seg.shape(0)), static_cast<std::size_t>(seg.shape(1)),
                  std::vector<std::uint8_t>(seg.data(), seg.data() + seg.size())};
        return iou_scores(mask, s, vocabulary);
      },
      py::arg("mask"), py::arg("segmentation"), py::arg("vocabulary"));
  m.def("label_tokens", &label_tokens);

  m.def(
      "semantic_similarity_loss",
      [](const Array& maps, const std::vector<Array>& undesired, const std::vector<Array>& desired, double lambda_b,
         double lambda_g) {
        ClassBank bank{concept_list(undesired), concept_list(desired)};
        return semantic_similarity_loss(constant(to_tensor(maps)), bank, LossParams{lambda_b, lambda_g}).item();
      },
      py::arg("feature_maps"), py::arg("undesired"), py::arg("desired"), py::arg("lambda_b") = 5e-2,
      py::arg("lambda_g") = 1e-3);

  m.def("decision_path", [](const RuleSet& rs, std::size_t rule) { return decision_path(rs, rule); });
  m.def("size_stats", [](const RuleSet& rs) {
    const auto s = ruleset_size_stats(rs);
    return py::make_tuple(s.predicates, s.size);
  });

  py::class_<CnnModel>(m, "CnnModel")
      .def_property_readonly("filters", [](const CnnModel& c) { return c.config.filters; })
      .def_property_readonly("classes", [](const CnnModel& c) { return c.config.classes; })
      .def_property_readonly("input_size", [](const CnnModel& c) { return c.config.input_size; })
      .def("forward",
           [](const CnnModel& c, const Array& image) {
             const auto r = forward(c, to_tensor(image));
             return py::make_tuple(to_array(r.feature_maps), to_array(r.logits));
           })
      .def("predict", [](const CnnModel& c, const Array& image) { return predict(c, to_tensor(image)); })
      .def("save", [](const CnnModel& c, const std::filesystem::path& p) { save_checkpoint(c, p); });
  m.def(
      "build_model",
      [](std::size_t input_size, std::size_t channels, std::vector<std::size_t> blocks, std::size_t filters,
         std::size_t classes, std::uint64_t seed) {
        CnnConfig c;
        c.input_size = input_size;
        c.channels = channels;
        c.blocks = std::move(blocks);
        c.filters = filters;
        c.classes = classes;
        c.seed = seed;
        return build_model(c);
      },
      py::arg("input_size") = 32, py::arg("channels") = 3, py::arg("blocks") = std::vector<std::size_t>{8, 16},
      py::arg("filters") = 16, py::arg("classes") = 2, py::arg("seed") = 0);
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "generate_benchmark",
      [](std::uint64_t seed, std::size_t count_per_class, const std::string& split) {
        return dataset_dict(generate(benchmark_spec(seed), count_per_class, parse_split(split)));
      },
      py::arg("seed"), py::arg("count_per_class"), py::arg("split") = "train",
      "synthetic desert_road/street scenes with masks");
}
