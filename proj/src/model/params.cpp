#include "model/params.hpp"

#include <cmath>
#include <stdexcept>

#include "numerics/random.hpp"

namespace lesion {
namespace {

std::string layer_name(std::size_t l, const char* leaf) { return "blocks." + std::to_string(l) + "." + leaf; }

struct Spec {
  std::string name;
  Shape shape;
  enum class Init { kWeight, kZero, kOne, kSmall } init;
};

std::vector<Spec> param_specs(const ModelConfig& c) {
  using I = Spec::Init;
  const std::size_t d = c.embed_dim, hidden = c.mlp_hidden();
  std::vector<Spec> specs = {
      {"patch_embed.weight", {c.patch_values(), d}, I::kWeight},
      {"patch_embed.bias", {1, d}, I::kZero},
      {"cls_token", {1, d}, I::kSmall},
      {"pos_embed", {c.num_patches() + 1, d}, I::kSmall},
  };
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    specs.push_back({layer_name(l, "norm1.gain"), {1, d}, I::kOne});
    specs.push_back({layer_name(l, "norm1.bias"), {1, d}, I::kZero});
    specs.push_back({layer_name(l, "attn.wq"), {d, d}, I::kWeight});
    specs.push_back({layer_name(l, "attn.wk"), {d, d}, I::kWeight});
    specs.push_back({layer_name(l, "attn.wv"), {d, d}, I::kWeight});
    specs.push_back({layer_name(l, "attn.wo"), {d, d}, I::kWeight});
    specs.push_back({layer_name(l, "attn.scale_logits"), {1, c.num_scales}, I::kZero});
    specs.push_back({layer_name(l, "norm2.gain"), {1, d}, I::kOne});
    specs.push_back({layer_name(l, "norm2.bias"), {1, d}, I::kZero});
    specs.push_back({layer_name(l, "mlp.fc1.weight"), {d, hidden}, I::kWeight});
    specs.push_back({layer_name(l, "mlp.fc1.bias"), {1, hidden}, I::kZero});
    specs.push_back({layer_name(l, "mlp.fc2.weight"), {hidden, d}, I::kWeight});
    specs.push_back({layer_name(l, "mlp.fc2.bias"), {1, d}, I::kZero});
  }
  specs.push_back({"norm.gain", {1, d}, I::kOne});
  specs.push_back({"norm.bias", {1, d}, I::kZero});
  specs.push_back({"head.weight", {d, c.num_classes}, I::kWeight});
  specs.push_back({"head.bias", {1, c.num_classes}, I::kZero});
  return specs;
}

}  // namespace

ModelParams ModelParams::initialize(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  Rng rng(mix_seed(config.seed, 0x1417));
  for (auto& spec : param_specs(config)) {
    Tensor t(spec.shape);
    switch (spec.init) {
      case Spec::Init::kWeight: {
        const double bound = std::sqrt(1.0 / static_cast<double>(spec.shape[0]));
        for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(-bound, bound));
        break;
      }
      case Spec::Init::kSmall:
        for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(-0.02, 0.02));
        break;
      case Spec::Init::kOne:
        for (auto& v : t.data()) v = Scalar(1);
        break;
      case Spec::Init::kZero:
        break;
    }
    params.entries_.push_back({std::move(spec.name), std::move(t)});
  }
  return params;
}

ModelParams ModelParams::zeros_like(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  for (auto& spec : param_specs(config)) params.entries_.push_back({std::move(spec.name), Tensor(spec.shape)});
  return params;
}

std::size_t ModelParams::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

std::size_t ModelParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw std::out_of_range("no parameter named '" + name + "'");
}

bool ModelParams::all_finite() const {
  for (const auto& e : entries_)
    if (!e.value.all_finite()) return false;
  return true;
}

BoundParams bind_params(Tape& tape, const ModelParams& params, const ModelConfig& config) {
  std::vector<Var> vars;
  for (const auto& e : params) vars.push_back(tape.recording() ? tape.variable(e.value) : tape.constant(e.value));
  return bind_params(std::move(vars), config);
}

BoundParams bind_params(std::vector<Var> vars, const ModelConfig& config) {
  BoundParams b;
  b.all = std::move(vars);
  std::size_t i = 0;
  auto next = [&] { return b.all.at(i++); };
  b.patch_weight = next();
  b.patch_bias = next();
  b.cls_token = next();
  b.pos_embed = next();
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerVars lv;
    lv.norm1_gain = next();
    lv.norm1_bias = next();
    lv.wq = next();
    lv.wk = next();
    lv.wv = next();
    lv.wo = next();
    lv.scale_logits = next();
    lv.norm2_gain = next();
    lv.norm2_bias = next();
    lv.fc1_weight = next();
    lv.fc1_bias = next();
    lv.fc2_weight = next();
    lv.fc2_bias = next();
    b.layers.push_back(lv);
  }
  b.norm_gain = next();
  b.norm_bias = next();
  b.head_weight = next();
  b.head_bias = next();
  if (i != b.all.size()) throw std::logic_error("parameter layout does not match config");
  return b;
}

}  // namespace lesion
