#include "training/run_config.hpp"

#include <charconv>
#include <sstream>

#include "common/errors.hpp"

namespace lesion {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::size_t parse_size(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config " + std::string(key) + ": expected a nonnegative integer, got '" + std::string(text) + "'");
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config " + std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw ConfigError("config " + std::string(key) + ": expected true/false, got '" + std::string(text) + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("adam betas must lie in (0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (!(lambda_attn >= 0)) throw ConfigError("lambda_attn must be >= 0");
  if (!(weight_epsilon > 0)) throw ConfigError("weight_epsilon must be positive");
  if (!(eval_fraction >= 0 && eval_fraction < 1)) throw ConfigError("eval_fraction must lie in [0, 1)");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "image_height", "image_width",     "channels",    "patch_size",     "embed_dim",  "num_heads",
      "num_scales",   "num_layers",      "mlp_ratio",   "num_classes",    "literal_multiscale",
      "seed",         "model_seed",      "epochs",      "batch_size",     "learning_rate", "beta1",
      "beta2",        "adam_eps",        "lambda_attn", "attn_mode",      "weight_epsilon", "eval_every",
      "eval_fraction", "augment",        "dynamic_weights", "lr_schedule"};
  return k;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "image_height") model.image_height = parse_size(key, value);
  else if (key == "image_width") model.image_width = parse_size(key, value);
  else if (key == "channels") model.channels = parse_size(key, value);
  else if (key == "patch_size") model.patch_size = parse_size(key, value);
  else if (key == "embed_dim") model.embed_dim = parse_size(key, value);
  else if (key == "num_heads") model.num_heads = parse_size(key, value);
  else if (key == "num_scales") model.num_scales = parse_size(key, value);
  else if (key == "num_layers") model.num_layers = parse_size(key, value);
  else if (key == "mlp_ratio") model.mlp_ratio = parse_double(key, value);
  else if (key == "num_classes") model.num_classes = parse_size(key, value);
  else if (key == "literal_multiscale") model.literal_multiscale = parse_bool(key, value);
  else if (key == "seed") model.seed = train.seed = parse_size(key, value);
  else if (key == "model_seed") model.seed = parse_size(key, value);
  else if (key == "epochs") train.epochs = parse_size(key, value);
  else if (key == "batch_size") train.batch_size = parse_size(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_double(key, value);
  else if (key == "beta1") train.beta1 = parse_double(key, value);
  else if (key == "beta2") train.beta2 = parse_double(key, value);
  else if (key == "adam_eps") train.adam_eps = parse_double(key, value);
  else if (key == "lambda_attn") train.lambda_attn = parse_double(key, value);
  else if (key == "attn_mode") train.attn_mode = parse_attn_mode(value);
  else if (key == "weight_epsilon") train.weight_epsilon = parse_double(key, value);
  else if (key == "eval_every") train.eval_every = parse_size(key, value);
  else if (key == "eval_fraction") train.eval_fraction = parse_double(key, value);
  else if (key == "augment") train.augment = parse_policy(value);
  else if (key == "dynamic_weights") train.dynamic_weights = parse_bool(key, value);
  else if (key == "lr_schedule") {
    if (value == "constant") train.lr_schedule = LrSchedule::kConstant;
    else if (value == "cosine") train.lr_schedule = LrSchedule::kCosine;
    else throw ConfigError("lr_schedule must be 'constant' or 'cosine'");
  } else {
    std::string valid;
    for (const auto& k : keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid);
  }
}

void RunConfig::set_assignment(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("expected KEY=VALUE, got '" + std::string(kv) + "'");
  set(kv.substr(0, eq), kv.substr(eq + 1));
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  auto line = [&](const char* k, const std::string& v) { out << k << '=' << v << '\n'; };
  line("image_height", std::to_string(model.image_height));
  line("image_width", std::to_string(model.image_width));
  line("channels", std::to_string(model.channels));
  line("patch_size", std::to_string(model.patch_size));
  line("embed_dim", std::to_string(model.embed_dim));
  line("num_heads", std::to_string(model.num_heads));
  line("num_scales", std::to_string(model.num_scales));
  line("num_layers", std::to_string(model.num_layers));
  line("mlp_ratio", format_double(model.mlp_ratio));
  line("num_classes", std::to_string(model.num_classes));
  line("literal_multiscale", model.literal_multiscale ? "true" : "false");
  line("seed", std::to_string(train.seed));
  line("model_seed", std::to_string(model.seed));
  line("epochs", std::to_string(train.epochs));
  line("batch_size", std::to_string(train.batch_size));
  line("learning_rate", format_double(train.learning_rate));
  line("beta1", format_double(train.beta1));
  line("beta2", format_double(train.beta2));
  line("adam_eps", format_double(train.adam_eps));
  line("lambda_attn", format_double(train.lambda_attn));
  line("attn_mode", std::string(to_string(train.attn_mode)));
  line("weight_epsilon", format_double(train.weight_epsilon));
  line("eval_every", std::to_string(train.eval_every));
  line("eval_fraction", format_double(train.eval_fraction));
  line("augment", format_policy(train.augment));
  line("dynamic_weights", train.dynamic_weights ? "true" : "false");
  line("lr_schedule", train.lr_schedule == LrSchedule::kCosine ? "cosine" : "constant");
  return out.str();
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig cfg;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    if (!line.empty()) cfg.set_assignment(line);
    start = end + 1;
  }
  return cfg;
}

}  // namespace lesion
