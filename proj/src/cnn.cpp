#include "nesybicor/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "nesybicor/adam.hpp"
#include "nesybicor/kernels.hpp"
#include "nesybicor/rng.hpp"

namespace nesybicor {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPadding = 1;
constexpr std::size_t kPool = 2;

}  // namespace

void CnnConfig::validate() const {
  if (input_size == 0) throw std::invalid_argument("CnnConfig.input_size must be positive");
  if (channels == 0) throw std::invalid_argument("CnnConfig.channels must be positive");
  if (filters < 1) throw std::invalid_argument("CnnConfig.filters must be >= 1");
  if (classes < 2) throw std::invalid_argument("CnnConfig.classes must be >= 2");
  for (auto b : blocks)
    if (b == 0) throw std::invalid_argument("CnnConfig.blocks entries must be positive");
  const std::size_t stride = std::size_t{1} << blocks.size();
  if (input_size % stride != 0)
    throw std::invalid_argument("CnnConfig.input_size " + std::to_string(input_size) + " not divisible by 2^" +
                                std::to_string(blocks.size()));
}

std::size_t CnnConfig::feature_map_extent() const { return input_size >> blocks.size(); }

CnnModel build_model(const CnnConfig& config) {
  config.validate();
  CnnModel model{config, {}};
  Rng rng(derive_seed(config.seed, 0x434e4e));
  auto he = [&](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    // Values are kept float32-representable so checkpoints round-trip exactly.
    for (Real& v : t.values()) v = static_cast<float>(sd * rng.normal());
    return t;
  };
  std::size_t in = config.channels;
  for (auto out : config.blocks) {
    model.params.push_back(he({out, in, kKernel, kKernel}, in * kKernel * kKernel));
    model.params.emplace_back(Shape{out});
    in = out;
  }
  model.params.push_back(he({config.filters, in, kKernel, kKernel}, in * kKernel * kKernel));
  model.params.emplace_back(Shape{config.filters});
  const std::size_t flat =
      config.head == HeadKind::Flatten ? config.filters * config.feature_map_size() : config.filters;
  model.params.push_back(he({config.classes, flat}, flat));
  model.params.emplace_back(Shape{config.classes});
  return model;
}

Tensor ForwardResult::feature_map(std::size_t k) const {
  const std::size_t h = feature_maps.dim(1), w = feature_maps.dim(2);
  std::vector<Real> v(feature_maps.data() + k * h * w, feature_maps.data() + (k + 1) * h * w);
  return Tensor({h, w}, std::move(v));
}

Tensor ForwardResult::flat_map(std::size_t k) const {
  const std::size_t n = feature_maps.dim(1) * feature_maps.dim(2);
  std::vector<Real> v(feature_maps.data() + k * n, feature_maps.data() + (k + 1) * n);
  return Tensor({n}, std::move(v));
}

static void check_image(const CnnConfig& config, const Tensor& image) {
  const Shape expected{config.channels, config.input_size, config.input_size};
  if (image.shape() != expected)
    throw ShapeError("image shape " + shape_string(image.shape()) + " does not match configured " +
                     shape_string(expected));
}

ForwardResult forward(const CnnModel& model, const Tensor& image) {
  check_image(model.config, image);
  Tensor x = image;
  std::size_t p = 0;
  for (std::size_t b = 0; b < model.config.blocks.size(); ++b, p += 2) {
    x = kernels::relu(kernels::add_channel_bias(kernels::conv2d(x, model.params[p], 1, kPadding), model.params[p + 1]));
    x = kernels::maxpool(x, kPool).output;
  }
  ForwardResult r;
  r.feature_maps =
      kernels::relu(kernels::add_channel_bias(kernels::conv2d(x, model.params[p], 1, kPadding), model.params[p + 1]));
  const Tensor head_in = model.config.head == HeadKind::Flatten ? r.feature_maps.reshaped({r.feature_maps.size()})
                                                                : kernels::channel_mean(r.feature_maps);
  r.logits = kernels::dense(head_in, model.params[p + 2], model.params[p + 3]);
  return r;
}

GraphOutputs forward_graph(const CnnConfig& config, std::span<const Var> params, const Var& image) {
  check_image(config, image.value());
  if (params.size() != 2 * config.blocks.size() + 4)
    throw std::invalid_argument("forward_graph: expected " + std::to_string(2 * config.blocks.size() + 4) +
                                " parameter nodes, got " + std::to_string(params.size()));
  Var x = image;
  std::size_t p = 0;
  for (std::size_t b = 0; b < config.blocks.size(); ++b, p += 2)
    x = maxpool(relu(add_channel_bias(conv2d(x, params[p], 1, kPadding), params[p + 1])), kPool);
  GraphOutputs out;
  out.feature_maps = relu(add_channel_bias(conv2d(x, params[p], 1, kPadding), params[p + 1]));
  const Var head_in = config.head == HeadKind::Flatten ? flatten(out.feature_maps) : channel_mean(out.feature_maps);
  out.logits = dense(head_in, params[p + 2], params[p + 3]);
  return out;
}

std::size_t argmax(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

std::size_t predict(const CnnModel& model, const Tensor& image) { return argmax(forward(model, image).logits); }

void TrainConfig::validate(std::size_t classes) const {
  if (epochs == 0) throw std::invalid_argument("TrainConfig.epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig.batch_size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig.learning_rate must be positive");
  if (l2 < 0) throw std::invalid_argument("TrainConfig.l2 must be non-negative");
  if (!(decay_factor > 0)) throw std::invalid_argument("TrainConfig.decay_factor must be positive");
  if (patience < 1) throw std::invalid_argument("TrainConfig.patience must be >= 1");
  if (!class_weights.empty() && class_weights.size() != classes)
    throw std::invalid_argument("TrainConfig.class_weights has " + std::to_string(class_weights.size()) +
                                " entries for " + std::to_string(classes) + " classes");
  for (Real w : class_weights)
    if (!(w > 0)) throw std::invalid_argument("TrainConfig.class_weights must be positive");
}

Real l2_penalty(const CnnModel& model, Real coefficient) {
  Real s = 0;
  for (std::size_t i = 0; i < model.params.size(); ++i)
    if (CnnModel::is_weight(i)) s += kernels::sum_squares(model.params[i]);
  return coefficient * s;
}

namespace {

struct ExampleResult {
  Real ce = 0;  // class-weighted
  Real aux = 0;
  bool correct = false;
  std::vector<Tensor> grads;
};

ExampleResult run_example(const CnnModel& model, const Sample& sample, const TrainConfig& config,
                          const AuxLoss& aux) {
  if (sample.label >= model.config.classes)
    throw std::out_of_range("sample '" + sample.id + "' label " + std::to_string(sample.label) +
                            " out of range for " + std::to_string(model.config.classes) + " classes");
  std::vector<Var> params;
  params.reserve(model.params.size());
  for (const auto& p : model.params) params.push_back(parameter(p));
  const auto out = forward_graph(model.config, params, constant(sample.image));
  const Real weight = config.class_weights.empty() ? Real(1) : config.class_weights[sample.label];
  Var ce = softmax_cross_entropy(out.logits, sample.label);
  ExampleResult r;
  r.ce = weight * ce.item();
  r.correct = argmax(out.logits.value()) == sample.label;
  Var loss = scale(ce, weight);
  if (aux) {
    Var a = aux(out.feature_maps, sample);
    r.aux = a.item();
    loss = add(loss, a);
  }
  backward(loss);
  r.grads.reserve(params.size());
  for (const auto& p : params) r.grads.push_back(p.grad());
  return r;
}

template <typename F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t)
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  workers.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

BatchObjective batch_objective(const CnnModel& model, const Dataset& data, std::span<const std::size_t> batch,
                               const TrainConfig& config, const AuxLoss& aux) {
  if (batch.empty()) throw std::invalid_argument("batch_objective: empty batch");
  std::vector<ExampleResult> results(batch.size());
  parallel_for(batch.size(), config.threads,
               [&](std::size_t i) { results[i] = run_example(model, data.samples.at(batch[i]), config, aux); });

  BatchObjective obj;
  for (const auto& p : model.params) obj.grads.push_back(Tensor::zeros_like(p));
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  for (const auto& r : results) {
    obj.ce += r.ce;
    obj.aux += r.aux;
    obj.correct += r.correct ? 1 : 0;
    for (std::size_t p = 0; p < obj.grads.size(); ++p) {
      Tensor& g = obj.grads[p];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += r.grads[p][j];
    }
  }
  obj.ce *= inv;
  obj.aux *= inv;
  for (std::size_t p = 0; p < obj.grads.size(); ++p) {
    Tensor& g = obj.grads[p];
    const bool decay = CnnModel::is_weight(p) && config.l2 > 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] *= inv;
      if (decay) g[j] += 2 * config.l2 * model.params[p][j];
    }
  }
  obj.l2 = l2_penalty(model, config.l2);
  obj.total = obj.ce + obj.aux + obj.l2;
  return obj;
}

Evaluation evaluate(const CnnModel& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  Evaluation e;
  for (const auto& s : data.samples) {
    const auto r = forward(model, s.image);
    e.loss += kernels::softmax_cross_entropy(r.logits, s.label);
    e.accuracy += argmax(r.logits) == s.label ? 1 : 0;
  }
  e.loss /= static_cast<Real>(data.size());
  e.accuracy /= static_cast<Real>(data.size());
  return e;
}

std::vector<EpochRecord> train(CnnModel& model, const Dataset& data, const TrainConfig& config, const AuxLoss& aux,
                               const Dataset* validation, const EpochHook& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  config.validate(model.config.classes);
  for (const auto& s : data.samples)
    if (s.label >= model.config.classes)
      throw std::out_of_range("train: sample '" + s.id + "' has label " + std::to_string(s.label) +
                              " but the model has " + std::to_string(model.config.classes) + " classes");

  AdamState adam;
  adam.learning_rate = config.learning_rate;
  Rng rng(derive_seed(config.seed, 0x747261696e));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Real best_validation = std::numeric_limits<Real>::infinity();
  std::size_t stale = 0;
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = adam.learning_rate;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      auto obj = batch_objective(model, data, batch, config, aux);
      rec.ce_loss += obj.ce * static_cast<Real>(len);
      rec.aux_loss += obj.aux * static_cast<Real>(len);
      correct += obj.correct;
      adam_update(model.params, obj.grads, adam);
    }
    const Real n = static_cast<Real>(data.size());
    rec.ce_loss /= n;
    rec.aux_loss /= n;
    rec.train_accuracy = static_cast<Real>(correct) / n;
    rec.l2_loss = l2_penalty(model, config.l2);
    rec.validation_loss = validation && !validation->empty() ? evaluate(model, *validation).loss : rec.ce_loss;

    if (rec.validation_loss < best_validation) {
      best_validation = rec.validation_loss;
      stale = 0;
    } else if (++stale >= config.patience) {
      adam.learning_rate *= config.decay_factor;
      stale = 0;
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(epoch, model);
  }
  return history;
}

namespace {

constexpr char kMagic[4] = {'N', 'S', 'B', 'C'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    value |= static_cast<T>(static_cast<std::uint8_t>(c)) << (8 * i);
  }
  return value;
}

}  // namespace

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp.string() + "' for writing");
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    const auto& c = model.config;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_size));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.channels));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.blocks.size()));
    for (auto b : c.blocks) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.filters));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.classes));
    out.put(static_cast<char>(c.head));
    put_le<std::uint64_t>(out, c.seed);
    for (const auto& p : model.params) {
      put_le<std::uint64_t>(out, p.size());
      for (Real v : p.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw CheckpointError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("bad magic in '" + path.string() + "' (expected NSBC)");
  const int version = in.get();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in '" + path.string() + "'");
  CnnConfig c;
  c.input_size = get_le<std::uint32_t>(in, "input size");
  c.channels = get_le<std::uint32_t>(in, "channel count");
  const auto nblocks = get_le<std::uint32_t>(in, "block count");
  if (nblocks > 16) throw CheckpointError("implausible block count " + std::to_string(nblocks));
  c.blocks.clear();
  for (std::uint32_t i = 0; i < nblocks; ++i) c.blocks.push_back(get_le<std::uint32_t>(in, "block width"));
  c.filters = get_le<std::uint32_t>(in, "filter count");
  c.classes = get_le<std::uint32_t>(in, "class count");
  const int head = in.get();
  if (head == std::char_traits<char>::eof()) throw CheckpointError("checkpoint truncated in head kind");
  if (head != 0 && head != 1) throw CheckpointError("unknown head kind " + std::to_string(head));
  c.head = static_cast<HeadKind>(head);
  c.seed = get_le<std::uint64_t>(in, "seed");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid config echo: ") + e.what());
  }
  CnnModel model = build_model(c);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto count = get_le<std::uint64_t>(in, "parameter length");
    if (count != model.params[i].size())
      throw CheckpointError("parameter " + std::to_string(i) + " length " + std::to_string(count) +
                            " does not match expected " + std::to_string(model.params[i].size()));
    for (Real& v : model.params[i].values())
      v = std::bit_cast<float>(get_le<std::uint32_t>(in, "parameter values"));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError("trailing bytes after parameters in '" + path.string() + "'");
  return model;
}

}  // namespace nesybicor
