#include "repmatch/adapter.hpp"

#include <set>

#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"
#include "repmatch/rab.hpp"
#include "repmatch/rng.hpp"

namespace repmatch {

LoraAdapter::LoraAdapter(std::string id, Matrix a_factor, Matrix b_factor)
    : layer_id(std::move(id)), a(std::move(a_factor)), b(std::move(b_factor)) {
  const std::size_t d = a.rows();
  const std::size_t r = a.cols();
  if (b.rows() != r || b.cols() != d) {
    throw DataError("adapter " + layer_id + ": a is " + std::to_string(d) + "x" +
                    std::to_string(r) + " but b is " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
  if (r > d) throw DataError("adapter " + layer_id + ": rank exceeds dimension");
}

Matrix compose(const LoraAdapter& adapter) { return matmul(adapter.a, adapter.b); }

std::size_t effective_rank(const Matrix& delta, double tol) {
  if (frobenius_norm_sq(delta) == 0.0) return 0;
  return effective_rank(svd(delta).singular_values, tol);
}

void AdapterBundle::validate() const {
  if (layers.empty()) throw DataError("bundle has no layers");
  std::set<std::string> seen;
  for (const auto& layer : layers) {
    if (layer.rank() != rank) {
      throw DataError("bundle rank " + std::to_string(rank) + " but layer " + layer.layer_id +
                      " has rank " + std::to_string(layer.rank()));
    }
    if (!seen.insert(layer.layer_id).second) {
      throw DataError("duplicate layer id " + layer.layer_id);
    }
  }
}

const LoraAdapter* AdapterBundle::find(const std::string& layer_id) const {
  for (const auto& layer : layers)
    if (layer.layer_id == layer_id) return &layer;
  return nullptr;
}

namespace {

struct Encoded {
  nlohmann::json manifest;
  rab::Writer writer;
};

Encoded encode(const AdapterBundle& bundle) {
  bundle.validate();
  Encoded out;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : bundle.layers) {
    const std::uint64_t a_offset = out.writer.add(layer.a);
    const std::uint64_t b_offset = out.writer.add(layer.b);
    layers.push_back({{"layer_id", layer.layer_id},
                      {"d", layer.dim()},
                      {"r", layer.rank()},
                      {"a_offset", a_offset},
                      {"b_offset", b_offset}});
  }
  out.manifest = {
      {"format_version", rab::kFormatVersion},
      {"kind", "adapter_bundle"},
      {"model_tag", bundle.model_tag},
      {"base_hash", hash_to_hex(bundle.base_checkpoint_hash)},
      {"rank", bundle.rank},
      {"training_meta",
       {{"seed", bundle.training_meta.seed},
        {"epochs", bundle.training_meta.epochs},
        {"learning_rate", bundle.training_meta.learning_rate},
        {"dataset", bundle.training_meta.dataset}}},
      {"blob_bytes", out.writer.blob_bytes()},
      {"layers", std::move(layers)},
  };
  return out;
}

template <typename T>
T field(const nlohmann::json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(std::string("manifest missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("manifest field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::uint64_t content_hash(const AdapterBundle& bundle) { return encode(bundle).writer.content_hash(); }

std::vector<std::byte> encode_bundle(const AdapterBundle& bundle) {
  const Encoded enc = encode(bundle);
  return enc.writer.finish(enc.manifest);
}

AdapterBundle decode_bundle(std::span<const std::byte> bytes) {
  const rab::Container c = rab::parse(bytes);
  const auto& m = c.manifest;
  if (const auto kind = m.find("kind"); kind != m.end() && *kind != "adapter_bundle") {
    throw FormatError("expected an adapter bundle, found kind " + kind->dump());
  }
  AdapterBundle bundle;
  bundle.model_tag = field<std::string>(m, "model_tag");
  const auto base = hash_from_hex(field<std::string>(m, "base_hash"));
  if (!base) throw FormatError("manifest field 'base_hash' is not 16 hex digits");
  bundle.base_checkpoint_hash = *base;
  bundle.rank = field<std::size_t>(m, "rank");
  if (const auto meta = m.find("training_meta"); meta != m.end() && meta->is_object()) {
    bundle.training_meta.seed = meta->value("seed", std::uint64_t{0});
    bundle.training_meta.epochs = meta->value("epochs", std::uint64_t{0});
    bundle.training_meta.learning_rate = meta->value("learning_rate", 0.0);
    bundle.training_meta.dataset = meta->value("dataset", std::string{});
  }
  const auto layers = m.find("layers");
  if (layers == m.end() || !layers->is_array()) throw FormatError("manifest missing 'layers' array");
  std::uint64_t accounted = 0;
  for (const auto& entry : *layers) {
    const auto id = field<std::string>(entry, "layer_id");
    const auto d = field<std::size_t>(entry, "d");
    const auto r = field<std::size_t>(entry, "r");
    Matrix a = c.read(field<std::uint64_t>(entry, "a_offset"), d, r);
    Matrix b = c.read(field<std::uint64_t>(entry, "b_offset"), r, d);
    accounted += 4ULL * (a.size() + b.size());
    bundle.layers.emplace_back(id, std::move(a), std::move(b));
  }
  if (accounted != c.blobs.size()) {
    throw FormatError("manifest/blob length mismatch: layers describe " + std::to_string(accounted) +
                      " bytes, blob region holds " + std::to_string(c.blobs.size()));
  }
  bundle.validate();
  return bundle;
}

void save_bundle(const AdapterBundle& bundle, const std::filesystem::path& path) {
  write_atomic(path, encode_bundle(bundle));
}

AdapterBundle load_bundle(const std::filesystem::path& path) { return decode_bundle(read_binary(path)); }

AdapterBundle shuffle_entries(const AdapterBundle& bundle, std::uint64_t seed) {
  bundle.validate();
  AdapterBundle out = bundle;
  out.model_tag = bundle.model_tag + "+shuffled";
  out.layers.clear();
  for (std::size_t l = 0; l < bundle.layers.size(); ++l) {
    const LoraAdapter& layer = bundle.layers[l];
    const Matrix delta = compose(layer);
    Matrix shuffled = delta;
    Rng rng(mix_seed(seed, l));
    rng.shuffle(shuffled.entries());
    if (shuffled == delta) {
      out.layers.push_back(layer);
      continue;
    }
    const std::size_t r = layer.rank();
    const SvdResult f = svd(shuffled);
    Matrix a(layer.dim(), r);
    Matrix b(r, layer.dim());
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t i = 0; i < layer.dim(); ++i) a(i, k) = f.left(i, k) * f.singular_values[k];
      for (std::size_t j = 0; j < layer.dim(); ++j) b(k, j) = f.right(j, k);
    }
    out.layers.emplace_back(layer.layer_id, std::move(a), std::move(b));
  }
  return out;
}

}  // namespace repmatch
