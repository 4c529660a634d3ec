#include "repmatch/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"
#include "repmatch/rab.hpp"
#include "repmatch/rng.hpp"

namespace repmatch {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kOrderStream = 12;
constexpr std::uint64_t kPretrainInitStream = 21;
constexpr std::uint64_t kPretrainOrderStream = 22;
constexpr std::uint64_t kGenericFamilySeed = 0x6e6e7269;

std::vector<double> lattice(std::vector<double> v) {
  for (double& x : v) x = rab::to_f32_lattice(x);
  return v;
}

void check_dims(const NetDims& dims, const BaseWeights& base, const Head& head) {
  if (dims.d == 0 || dims.depth == 0 || dims.classes == 0) throw DataError("network dimensions must be positive");
  if (base.weights.size() != dims.depth || base.biases.size() != dims.depth) {
    throw DataError("base weights do not match depth " + std::to_string(dims.depth));
  }
  for (std::size_t l = 0; l < dims.depth; ++l) {
    if (base.weights[l].rows() != dims.d || base.weights[l].cols() != dims.d || base.biases[l].size() != dims.d) {
      throw DataError("base layer " + std::to_string(l) + " is not " + std::to_string(dims.d) + "x" +
                      std::to_string(dims.d));
    }
  }
  if (base.input_shift.size() != dims.d || base.input_scale.size() != dims.d) {
    throw DataError("input normalization does not match width " + std::to_string(dims.d));
  }
  if (head.weight.rows() != dims.classes || head.weight.cols() != dims.d || head.bias.size() != dims.classes) {
    throw DataError("head does not match " + std::to_string(dims.classes) + " classes x width " +
                    std::to_string(dims.d));
  }
}

std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t state) {
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      state ^= (bits >> (8 * i)) & 0xff;
      state *= kFnvPrime;
    }
  }
  return state;
}

// Writes blobs in a fixed order; the same order defines the content hash.
struct CheckpointImage {
  rab::Writer writer;
  nlohmann::json tensors = nlohmann::json::array();

  void add(const std::string& name, const Matrix& m) {
    const std::uint64_t offset = writer.add(m);
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
  }
};

CheckpointImage image_of(const NetDims& dims, const BaseWeights& base, const Head& head) {
  CheckpointImage img;
  for (std::size_t l = 0; l < dims.depth; ++l) {
    img.add("weight." + std::to_string(l), base.weights[l]);
    img.add("bias." + std::to_string(l), Matrix::row(base.biases[l]));
  }
  img.add("input_shift", Matrix::row(base.input_shift));
  img.add("input_scale", Matrix::row(base.input_scale));
  img.add("head.weight", head.weight);
  img.add("head.bias", Matrix::row(head.bias));
  return img;
}

// Effective per-layer matrices W + A B for the current parameters.
std::vector<Matrix> effective_weights(const TinyNet& net) {
  std::vector<Matrix> out = net.base.weights;
  for (std::size_t l = 0; l < net.adapters.size(); ++l) {
    const LoraAdapter& ad = net.adapters[l];
    Matrix& m = out[l];
    for (std::size_t i = 0; i < ad.dim(); ++i)
      for (std::size_t k = 0; k < ad.rank(); ++k) {
        const double aik = ad.a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < ad.dim(); ++j) m(i, j) += aik * ad.b(k, j);
      }
  }
  return out;
}

// Activations of one forward pass: h[0] is the normalized input, h[l + 1] the
// output of hidden layer l.
struct Trace {
  std::vector<std::vector<double>> h;
  std::vector<double> logits;
};

Trace run(const TinyNet& net, const std::vector<Matrix>& weights, std::span<const double> x) {
  const std::size_t d = net.dims.d;
  if (x.size() != d) {
    throw DataError("input has " + std::to_string(x.size()) + " features, network expects " + std::to_string(d));
  }
  Trace t;
  t.h.resize(net.dims.depth + 1, std::vector<double>(d));
  for (std::size_t k = 0; k < d; ++k) t.h[0][k] = (x[k] - net.base.input_shift[k]) * net.base.input_scale[k];
  for (std::size_t l = 0; l < net.dims.depth; ++l) {
    const Matrix& w = weights[l];
    const auto& in = t.h[l];
    auto& out = t.h[l + 1];
    for (std::size_t i = 0; i < d; ++i) {
      double z = net.base.biases[l][i];
      const auto row = w.row_span(i);
      for (std::size_t j = 0; j < d; ++j) z += row[j] * in[j];
      out[i] = z > 0.0 ? z : 0.0;
    }
  }
  t.logits.assign(net.dims.classes, 0.0);
  const auto& top = t.h[net.dims.depth];
  for (std::size_t c = 0; c < net.dims.classes; ++c) {
    double z = net.head.bias[c];
    const auto row = net.head.weight.row_span(c);
    for (std::size_t j = 0; j < d; ++j) z += row[j] * top[j];
    if (!std::isfinite(z)) throw NumericalError("non-finite logits (exploding activations)");
    t.logits[c] = z;
  }
  return t;
}

double log_sum_exp(std::span<const double> v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - peak);
  return peak + std::log(sum);
}

TinyNet build_net(const Checkpoint& ckpt) {
  return TinyNet{ckpt.dims(), ckpt.base(), ckpt.head_init(), {}};
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

std::vector<Instance const*> all_instances(const Dataset& data) {
  std::vector<const Instance*> out;
  out.reserve(data.size());
  for (const auto& inst : data.instances) out.push_back(&inst);
  return out;
}

// Minibatch SGD over `net`. Adapters (if any) always train; head and base on
// request.
void train(TinyNet& net, const Dataset& data, std::size_t epochs, std::size_t batch_size, double lr,
           std::uint64_t order_seed, bool update_head, bool update_base) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(order_seed);
  std::vector<const Instance*> batch;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data.instances[order[i]]);
      const LossAndGrads g = loss_and_grads(net, batch, update_base);
      for (std::size_t l = 0; l < net.adapters.size(); ++l) {
        sgd_step(net.adapters[l].a.entries(), g.grad_a[l].entries(), lr);
        sgd_step(net.adapters[l].b.entries(), g.grad_b[l].entries(), lr);
      }
      if (update_head) {
        sgd_step(net.head.weight.entries(), g.grad_head.entries(), lr);
        sgd_step(net.head.bias, g.grad_head_bias, lr);
      }
      if (update_base) {
        for (std::size_t l = 0; l < net.dims.depth; ++l) {
          sgd_step(net.base.weights[l].entries(), g.base->weights[l].entries(), lr);
          sgd_step(net.base.biases[l], g.base->biases[l], lr);
        }
      }
    }
  }
}

}  // namespace

std::string layer_name(std::size_t layer) { return "hidden." + std::to_string(layer); }

std::uint64_t checksum(const BaseWeights& base) {
  std::uint64_t state = kFnvOffset;
  for (const auto& w : base.weights) state = hash_doubles(w.entries(), state);
  for (const auto& b : base.biases) state = hash_doubles(b, state);
  state = hash_doubles(base.input_shift, state);
  return hash_doubles(base.input_scale, state);
}

Checkpoint::Checkpoint(NetDims dims, BaseWeights base, Head head_init, std::uint64_t seed)
    : dims_(dims), base_(std::move(base)), head_init_(std::move(head_init)), seed_(seed), hash_(0) {
  check_dims(dims_, base_, head_init_);
  for (auto& w : base_.weights) w = rab::to_f32_lattice(w);
  for (auto& b : base_.biases) b = lattice(std::move(b));
  base_.input_shift = lattice(std::move(base_.input_shift));
  base_.input_scale = lattice(std::move(base_.input_scale));
  head_init_.weight = rab::to_f32_lattice(head_init_.weight);
  head_init_.bias = lattice(std::move(head_init_.bias));
  hash_ = image_of(dims_, base_, head_init_).writer.content_hash();
}

std::string Checkpoint::model_tag() const {
  return "tinynet-d" + std::to_string(dims_.d) + "-L" + std::to_string(dims_.depth) + "-c" +
         std::to_string(dims_.classes);
}

std::vector<std::byte> Checkpoint::encode() const {
  CheckpointImage img = image_of(dims_, base_, head_init_);
  const nlohmann::json manifest = {
      {"format_version", rab::kFormatVersion},
      {"kind", "checkpoint"},
      {"model_tag", model_tag()},
      {"dims", {{"d", dims_.d}, {"depth", dims_.depth}, {"classes", dims_.classes}}},
      {"seed", seed_},
      {"blob_bytes", img.writer.blob_bytes()},
      {"tensors", img.tensors},
  };
  return img.writer.finish(manifest);
}

Checkpoint Checkpoint::decode(std::span<const std::byte> bytes) {
  const rab::Container c = rab::parse(bytes);
  const auto& m = c.manifest;
  if (m.value("kind", std::string{}) != "checkpoint") throw FormatError("expected kind 'checkpoint'");
  NetDims dims;
  std::uint64_t seed = 0;
  nlohmann::json tensors;
  try {
    dims.d = m.at("dims").at("d").get<std::size_t>();
    dims.depth = m.at("dims").at("depth").get<std::size_t>();
    dims.classes = m.at("dims").at("classes").get<std::size_t>();
    seed = m.value("seed", std::uint64_t{0});
    tensors = m.at("tensors");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  auto tensor = [&](const std::string& name) {
    for (const auto& t : tensors) {
      if (t.value("name", std::string{}) != name) continue;
      try {
        return c.read(t.at("offset").get<std::uint64_t>(), t.at("rows").get<std::size_t>(),
                      t.at("cols").get<std::size_t>());
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed tensor entry " + name + ": " + e.what());
      }
    }
    throw FormatError("checkpoint missing tensor " + name);
  };
  auto vec = [](const Matrix& row) { return std::vector<double>(row.entries().begin(), row.entries().end()); };
  BaseWeights base;
  std::uint64_t accounted = 0;
  for (std::size_t l = 0; l < dims.depth; ++l) {
    base.weights.push_back(tensor("weight." + std::to_string(l)));
    base.biases.push_back(vec(tensor("bias." + std::to_string(l))));
  }
  base.input_shift = vec(tensor("input_shift"));
  base.input_scale = vec(tensor("input_scale"));
  Head head{tensor("head.weight"), vec(tensor("head.bias"))};
  for (const auto& t : tensors) accounted += 4ULL * t.value("rows", std::uint64_t{0}) * t.value("cols", std::uint64_t{0});
  if (accounted != c.blobs.size()) {
    throw FormatError("manifest/blob length mismatch: tensors describe " + std::to_string(accounted) +
                      " bytes, blob region holds " + std::to_string(c.blobs.size()));
  }
  Checkpoint ckpt(dims, std::move(base), std::move(head), seed);
  if (ckpt.hash() != c.content_hash()) throw FormatError("checkpoint content hash does not match its blobs");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) { write_atomic(path, ckpt.encode()); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return Checkpoint::decode(read_binary(path)); }

TinyNet TinyNet::from_checkpoint(const Checkpoint& ckpt) { return build_net(ckpt); }

TinyNet TinyNet::with_bundle(const Checkpoint& ckpt, const AdapterBundle& bundle, const Head& head) {
  if (bundle.base_checkpoint_hash != ckpt.hash()) {
    throw DataError("bundle was trained on checkpoint " + hash_to_hex(bundle.base_checkpoint_hash) +
                    ", not " + hash_to_hex(ckpt.hash()));
  }
  bundle.validate();
  TinyNet net = build_net(ckpt);
  if (head.weight.rows() != ckpt.dims().classes || head.weight.cols() != ckpt.dims().d ||
      head.bias.size() != ckpt.dims().classes) {
    throw DataError("head does not match checkpoint dimensions");
  }
  net.head = head;
  for (std::size_t l = 0; l < ckpt.dims().depth; ++l) {
    const LoraAdapter* ad = bundle.find(layer_name(l));
    if (ad == nullptr) throw DataError("bundle lacks layer " + layer_name(l));
    if (ad->dim() != ckpt.dims().d) throw DataError("bundle layer " + layer_name(l) + " has the wrong width");
    net.adapters.push_back(*ad);
  }
  return net;
}

std::vector<double> forward(const TinyNet& net, std::span<const double> x) {
  return run(net, effective_weights(net), x).logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) p[c] = std::exp(logits[c] - lse);
  return p;
}

LossAndGrads loss_and_grads(const TinyNet& net, std::span<const Instance* const> batch, bool with_base_grads) {
  if (batch.empty()) throw DataError("loss_and_grads: empty batch");
  const std::size_t d = net.dims.d;
  const std::size_t depth = net.dims.depth;
  const std::size_t classes = net.dims.classes;
  const std::vector<Matrix> weights = effective_weights(net);

  // dL/dM_l accumulated over the batch; adapter gradients follow from it.
  std::vector<Matrix> grad_m(depth, Matrix(d, d));
  std::vector<std::vector<double>> grad_bias(depth, std::vector<double>(d, 0.0));
  LossAndGrads out{0.0, {}, {}, Matrix(classes, d), std::vector<double>(classes, 0.0), std::nullopt};
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<double> g(d);
  std::vector<double> delta(d);
  for (const Instance* inst : batch) {
    if (inst->label >= classes) {
      throw DataError("label " + std::to_string(inst->label) + " out of range for " + std::to_string(classes) +
                      " classes");
    }
    const Trace t = run(net, weights, inst->features);
    const double lse = log_sum_exp(t.logits);
    out.loss += (lse - t.logits[inst->label]) * inv_n;

    const auto& top = t.h[depth];
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
      const double gc = (std::exp(t.logits[c] - lse) - (c == inst->label ? 1.0 : 0.0)) * inv_n;
      auto grow = out.grad_head.row_span(c);
      for (std::size_t j = 0; j < d; ++j) grow[j] += gc * top[j];
      out.grad_head_bias[c] += gc;
      const auto hrow = net.head.weight.row_span(c);
      for (std::size_t j = 0; j < d; ++j) g[j] += gc * hrow[j];
    }
    for (std::size_t l = depth; l-- > 0;) {
      const auto& in = t.h[l];
      const auto& act = t.h[l + 1];
      for (std::size_t i = 0; i < d; ++i) delta[i] = act[i] > 0.0 ? g[i] : 0.0;
      Matrix& gm = grad_m[l];
      for (std::size_t i = 0; i < d; ++i) {
        grad_bias[l][i] += delta[i];
        if (delta[i] == 0.0) continue;
        auto row = gm.row_span(i);
        for (std::size_t j = 0; j < d; ++j) row[j] += delta[i] * in[j];
      }
      if (l == 0) break;
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        if (delta[i] == 0.0) continue;
        const auto row = weights[l].row_span(i);
        for (std::size_t j = 0; j < d; ++j) g[j] += row[j] * delta[i];
      }
    }
  }

  for (std::size_t l = 0; l < net.adapters.size(); ++l) {
    const LoraAdapter& ad = net.adapters[l];
    out.grad_a.push_back(matmul(grad_m[l], ad.b.transpose()));  // d x r
    out.grad_b.push_back(matmul_tn(ad.a, grad_m[l]));           // r x d
  }
  if (with_base_grads) out.base = BaseGradients{std::move(grad_m), std::move(grad_bias)};
  return out;
}

LossAndGrads loss_and_grads(const TinyNet& net, const Dataset& batch, bool with_base_grads) {
  const auto ptrs = all_instances(batch);
  return loss_and_grads(net, ptrs, with_base_grads);
}

double mean_loss(const TinyNet& net, const Dataset& data) {
  if (data.empty()) throw DataError("mean_loss: empty dataset");
  const auto weights = effective_weights(net);
  double total = 0.0;
  for (const auto& inst : data.instances) {
    const Trace t = run(net, weights, inst.features);
    total += log_sum_exp(t.logits) - t.logits.at(inst.label);
  }
  return total / static_cast<double>(data.size());
}

void TrainConfig::validate(std::size_t d) const {
  if (rank == 0 || rank > d) throw DataError("rank must be in [1, " + std::to_string(d) + "]");
  if (batch_size == 0) throw DataError("batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DataError("learning rate must be positive");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw DataError("init scale must be positive");
}

TrainConfig TrainConfig::dataset_level() {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 40;
  cfg.learning_rate = 0.1;
  cfg.init_scale = 0.001;
  return cfg;
}

TrainConfig TrainConfig::instance_level() {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.3;
  cfg.init_scale = 0.02;
  return cfg;
}

FinetuneResult finetune(const Checkpoint& ckpt, const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  const NetDims& dims = ckpt.dims();
  cfg.validate(dims.d);
  if (data.feature_dim() != dims.d) {
    throw DataError("dataset has " + std::to_string(data.feature_dim()) + " features, checkpoint expects " +
                    std::to_string(dims.d));
  }
  if (data.classes > dims.classes) {
    throw DataError("dataset has " + std::to_string(data.classes) + " classes, checkpoint head has " +
                    std::to_string(dims.classes));
  }

  TinyNet net = build_net(ckpt);
  const std::uint64_t init_seed = mix_seed(cfg.seed, kInitStream);
  for (std::size_t l = 0; l < dims.depth; ++l) {
    Rng rng(mix_seed(init_seed, l));
    Matrix b(cfg.rank, dims.d);
    for (double& v : b.entries()) v = cfg.init_scale * rng.normal();
    net.adapters.emplace_back(layer_name(l), Matrix(dims.d, cfg.rank), std::move(b));
  }

  FinetuneResult result{std::move(net), {}, false, 0.0, 0.0};
  result.initial_loss = mean_loss(result.net, data);
  train(result.net, data, cfg.epochs, cfg.batch_size, cfg.learning_rate, mix_seed(cfg.seed, kOrderStream),
        cfg.train_head, cfg.full_finetune);
  result.final_loss = mean_loss(result.net, data);

  AdapterBundle& bundle = result.bundle;
  bundle.model_tag = ckpt.model_tag();
  bundle.base_checkpoint_hash = ckpt.hash();
  bundle.rank = cfg.rank;
  bundle.layers = result.net.adapters;
  bundle.training_meta = {cfg.seed, cfg.epochs, cfg.learning_rate, data.name};
  for (const auto& ad : bundle.layers) {
    if (frobenius_norm_sq(ad.a) == 0.0 || frobenius_norm_sq(ad.b) == 0.0) result.degenerate = true;
  }
  return result;
}

std::size_t predict(const TinyNet& net, std::span<const double> x) {
  const auto logits = forward(net, x);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double evaluate(const TinyNet& net, const Dataset& data) {
  if (data.empty()) return 0.0;
  const auto weights = effective_weights(net);
  std::size_t correct = 0;
  for (const auto& inst : data.instances) {
    const auto logits = run(net, weights, inst.features).logits;
    const auto guess = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (guess == inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate(const Checkpoint& ckpt, const AdapterBundle& bundle, const Head& head, const Dataset& data) {
  return evaluate(TinyNet::with_bundle(ckpt, bundle, head), data);
}

std::vector<double> embed(const Checkpoint& ckpt, std::span<const double> x) {
  const TinyNet net = build_net(ckpt);
  Trace t = run(net, net.base.weights, x);
  return std::move(t.h[net.dims.depth]);
}

Dataset default_generic_task(std::size_t d, std::size_t classes) {
  Dataset ds = gen_family(kGenericFamilySeed, kGenericFamilySeed, 2000, d, classes, 0.0);
  ds.name = "generic";
  return ds;
}

Checkpoint pretrain(std::uint64_t seed, const Dataset& generic_task, const PretrainConfig& cfg) {
  generic_task.validate();
  if (cfg.classes == 0) throw DataError("pretrain: head must have at least one class");
  const std::size_t d = generic_task.feature_dim();

  BaseWeights base;
  base.input_shift.assign(d, 0.0);
  base.input_scale.assign(d, 1.0);
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& inst : generic_task.instances) mean += inst.features[k];
    mean /= static_cast<double>(generic_task.size());
    double var = 0.0;
    for (const auto& inst : generic_task.instances) var += (inst.features[k] - mean) * (inst.features[k] - mean);
    var /= static_cast<double>(generic_task.size());
    base.input_shift[k] = mean;
    base.input_scale[k] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
  Rng rng(mix_seed(seed, kPretrainInitStream));
  const double he = std::sqrt(2.0 / static_cast<double>(d));
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    Matrix w(d, d);
    for (double& v : w.entries()) v = he * rng.normal();
    base.weights.push_back(std::move(w));
    base.biases.emplace_back(d, 0.0);
  }
  const double glorot = std::sqrt(1.0 / static_cast<double>(d));
  auto random_head = [&](std::size_t classes, double scale) {
    Head head{Matrix(classes, d), std::vector<double>(classes, 0.0)};
    for (double& v : head.weight.entries()) v = scale * rng.normal();
    return head;
  };

  // The pre-training head only shapes the base; it is discarded afterwards.
  TinyNet net{{d, cfg.depth, generic_task.classes}, std::move(base), random_head(generic_task.classes, glorot), {}};
  const std::uint64_t order_seed = mix_seed(seed, kPretrainOrderStream);
  double accuracy = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // One epoch at a time, each with its own order stream.
    train(net, generic_task, 1, cfg.batch_size, cfg.learning_rate, mix_seed(order_seed, epoch), true, true);
    accuracy = evaluate(net, generic_task);
    if (epoch + 1 >= cfg.min_epochs && accuracy >= cfg.accuracy_floor) {
      Head head_init = random_head(cfg.classes, cfg.head_init_scale * glorot);
      return Checkpoint({d, cfg.depth, cfg.classes}, std::move(net.base), std::move(head_init), seed);
    }
  }
  throw NumericalError("pretrain: train accuracy " + format_double(accuracy) + " below floor " +
                       format_double(cfg.accuracy_floor) + " after " + std::to_string(cfg.max_epochs) + " epochs");
}

}  // namespace repmatch
