#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repmatch/adapter.hpp"
#include "repmatch/data.hpp"
#include "repmatch/linalg.hpp"

namespace repmatch {

struct NetDims {
  std::size_t d = 32;
  std::size_t depth = 4;
  std::size_t classes = 4;

  friend bool operator==(const NetDims&, const NetDims&) = default;
};

// Frozen part of the network: per-layer square weights and biases plus a fixed
// input normalization x -> (x - shift) * scale.
struct BaseWeights {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> input_shift;
  std::vector<double> input_scale;

  friend bool operator==(const BaseWeights&, const BaseWeights&) = default;
};

struct Head {
  Matrix weight;  // classes x d
  std::vector<double> bias;

  friend bool operator==(const Head&, const Head&) = default;
};

// FNV-1a over the raw float64 bits of every base parameter.
std::uint64_t checksum(const BaseWeights& base);

// The "pre-trained model". Parameters are held on the float32 lattice so the
// in-memory object and its file are the same thing; hash() is the RAB1
// content hash of the serialized blobs.
class Checkpoint {
 public:
  Checkpoint(NetDims dims, BaseWeights base, Head head_init, std::uint64_t seed = 0);

  const NetDims& dims() const { return dims_; }
  const BaseWeights& base() const { return base_; }
  const Head& head_init() const { return head_init_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t hash() const { return hash_; }
  std::string model_tag() const;

  std::vector<std::byte> encode() const;
  static Checkpoint decode(std::span<const std::byte> bytes);

 private:
  NetDims dims_;
  BaseWeights base_;
  Head head_init_;
  std::uint64_t seed_;
  std::uint64_t hash_;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// h_l = relu((W_l + A_l B_l) h_{l-1} + c_l), logits = head * h_L + head_bias.
// An empty adapter list means ΔW = 0 everywhere.
struct TinyNet {
  NetDims dims;
  BaseWeights base;
  Head head;
  std::vector<LoraAdapter> adapters;

  static TinyNet from_checkpoint(const Checkpoint& ckpt);
  static TinyNet with_bundle(const Checkpoint& ckpt, const AdapterBundle& bundle, const Head& head);
};

std::vector<double> forward(const TinyNet& net, std::span<const double> x);
std::vector<double> softmax(std::span<const double> logits);

struct BaseGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct LossAndGrads {
  double loss = 0.0;  // mean cross-entropy over the batch
  std::vector<Matrix> grad_a;
  std::vector<Matrix> grad_b;
  Matrix grad_head;
  std::vector<double> grad_head_bias;
  std::optional<BaseGradients> base;  // only when requested (full fine-tuning)
};

LossAndGrads loss_and_grads(const TinyNet& net, std::span<const Instance* const> batch,
                            bool with_base_grads = false);
LossAndGrads loss_and_grads(const TinyNet& net, const Dataset& batch, bool with_base_grads = false);
double mean_loss(const TinyNet& net, const Dataset& data);

struct TrainConfig {
  std::size_t rank = 1;
  std::size_t epochs = 10;
  std::size_t batch_size = 40;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  // Standard deviation of the initial b factor (a starts at zero).
  double init_scale = 0.001;
  // The head stays at the checkpoint's head init unless set; only the
  // adapters learn.
  bool train_head = false;
  // Also update base weights and biases (the adapters keep training).
  bool full_finetune = false;

  void validate(std::size_t d) const;

  static TrainConfig dataset_level();
  static TrainConfig instance_level();
};

struct FinetuneResult {
  TinyNet net;
  AdapterBundle bundle;
  bool degenerate = false;  // some layer ended with ΔW = 0
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Fresh adapters (a = 0, b ~ N(0, init_scale²)) on top of the checkpoint,
// trained with plain minibatch SGD. Deterministic per (seed, data order).
FinetuneResult finetune(const Checkpoint& ckpt, const Dataset& data, const TrainConfig& cfg);

double evaluate(const TinyNet& net, const Dataset& data);
double evaluate(const Checkpoint& ckpt, const AdapterBundle& bundle, const Head& head, const Dataset& data);
// Argmax with ties to the lowest class index.
std::size_t predict(const TinyNet& net, std::span<const double> x);

// Penultimate representation h_L of the base network (no adapters).
std::vector<double> embed(const Checkpoint& ckpt, std::span<const double> x);

struct PretrainConfig {
  // Outputs of the downstream head stored as the checkpoint's head init.
  std::size_t classes = 2;
  std::size_t depth = 4;
  // Head init standard deviation in units of 1/sqrt(d).
  double head_init_scale = 1.0;
  std::size_t min_epochs = 20;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 40;
  double learning_rate = 0.05;
  double accuracy_floor = 0.8;
};

// Trains every weight of a fresh network (with a throwaway head) on a generic
// task until the train accuracy reaches the floor, then freezes the base and
// pairs it with a freshly drawn head of cfg.classes outputs. Throws
// NumericalError if the floor is not reached within max_epochs.
Checkpoint pretrain(std::uint64_t seed, const Dataset& generic_task, const PretrainConfig& cfg = {});

// The default generic pre-training task for a network of width d.
Dataset default_generic_task(std::size_t d = 32, std::size_t classes = 4);

std::string layer_name(std::size_t layer);

}  // namespace repmatch
