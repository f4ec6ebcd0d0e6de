#include "training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "common/errors.hpp"
#include "numerics/ops.hpp"
#include "numerics/random.hpp"

namespace lesion {

std::string format_step_log(const StepLog& log) {
  return std::to_string(log.step) + "," + std::to_string(log.epoch) + "," + format_double(log.loss.l_ce) + "," +
         format_double(log.loss.l_attn) + "," + format_double(log.loss.total);
}

Trainer::Trainer(LesionViT model, TrainConfig config, std::vector<Sample> train_set)
    : Trainer(model, config, std::move(train_set), AdamState::zeros_like(model.params()), 0) {}

Trainer::Trainer(LesionViT model, TrainConfig config, std::vector<Sample> train_set, AdamState optimizer,
                 std::uint64_t global_step)
    : model_(std::move(model)),
      config_(std::move(config)),
      train_set_(std::move(train_set)),
      optimizer_(std::move(optimizer)),
      global_step_(global_step) {
  config_.validate();
  if (train_set_.empty()) throw ConfigError("training set is empty");
  const ModelConfig& mc = model_.config();
  for (const auto& s : train_set_) {
    model_.check_image(s.image);
    if (s.label >= mc.num_classes)
      throw ConfigError("sample '" + s.id + "' label " + std::to_string(s.label) + " out of range");
    if (s.mask && (s.mask->height != s.image.height || s.mask->width != s.image.width || s.mask->channels != 1))
      throw DimensionError("sample '" + s.id + "' mask " + s.mask->dims() + " does not match image " + s.image.dims());
  }
  weights_ = class_weights(class_frequencies(train_set_, mc.num_classes), config_.weight_epsilon);
  if (optimizer_.first_moment.size() != model_.params().size())
    throw DimensionError("optimizer state does not match the model parameters");
}

std::size_t Trainer::steps_per_epoch() const {
  return (train_set_.size() + config_.batch_size - 1) / config_.batch_size;
}

std::vector<std::size_t> Trainer::epoch_order(std::uint64_t epoch) const {
  std::vector<std::size_t> order(train_set_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(config_.seed, mix_seed(0xE90C, epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

double Trainer::learning_rate_at(std::uint64_t step) const {
  if (config_.lr_schedule == LrSchedule::kConstant) return config_.learning_rate;
  const double total = static_cast<double>(std::max<std::uint64_t>(total_steps(), 1));
  return config_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total));
}

StepLog Trainer::step() {
  const ModelConfig& mc = model_.config();
  const std::size_t spe = steps_per_epoch();
  const std::uint64_t epoch = global_step_ / spe;
  const std::size_t batch_index = global_step_ % spe;
  const auto order = epoch_order(epoch);
  const std::size_t begin = batch_index * config_.batch_size;
  const std::size_t end = std::min(order.size(), begin + config_.batch_size);

  if (config_.dynamic_weights && batch_index == 0) {
    std::vector<std::size_t> labels;
    for (auto idx : order) labels.push_back(train_set_[idx].label);
    weights_ = class_weights(class_frequencies(labels, mc.num_classes), config_.weight_epsilon);
  }

  Tape tape;
  const BoundParams bound = bind_params(tape, model_.params(), mc);
  std::vector<Var> prob_rows, focus_maps;
  std::vector<std::optional<Tensor>> masks;
  std::vector<std::size_t> labels;
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t idx = order[i];
    Rng rng(mix_seed(config_.seed, mix_seed(epoch, idx)));
    const Sample sample = augment(train_set_[idx], config_.augment, rng);
    const ForwardResult fwd = forward(tape, bound, mc, sample.image);
    prob_rows.push_back(fwd.probs);
    focus_maps.push_back(fwd.focus_map);
    labels.push_back(sample.label);
    if (sample.mask)
      masks.emplace_back(mask_to_patch_grid(*sample.mask, mc.patch_size));
    else
      masks.emplace_back(std::nullopt);
  }

  const Var l_ce = weighted_cross_entropy(ops::concat_rows(prob_rows), labels, weights_);
  const bool any_mask = std::any_of(masks.begin(), masks.end(), [](const auto& m) { return m.has_value(); });
  Var total = l_ce;
  Var l_attn;
  if (config_.lambda_attn > 0 && any_mask) {
    l_attn = attention_regularization(tape, focus_maps, masks, config_.attn_mode);
    total = ops::add(l_ce, ops::scale(l_attn, static_cast<Scalar>(config_.lambda_attn)));
  }
  tape.backward(total);
  if (!l_attn.valid()) l_attn = attention_regularization(tape, focus_maps, masks, config_.attn_mode);

  last_grads_.clear();
  for (const Var& v : bound.all) last_grads_.push_back(v.grad());
  adam_step(model_.params(), last_grads_, optimizer_, {config_.beta1, config_.beta2, config_.adam_eps},
            learning_rate_at(global_step_));

  ++global_step_;
  StepLog log;
  log.step = global_step_;
  log.epoch = epoch;
  log.loss = total_loss(l_ce.value()[0], l_attn.value()[0], config_.lambda_attn);
  return log;
}

std::vector<StepLog> Trainer::train_epoch() {
  std::vector<StepLog> logs;
  const std::size_t spe = steps_per_epoch();
  do {
    logs.push_back(step());
  } while (global_step_ % spe != 0);
  return logs;
}

std::vector<StepLog> Trainer::train_steps(std::size_t count) {
  std::vector<StepLog> logs;
  for (std::size_t i = 0; i < count; ++i) logs.push_back(step());
  return logs;
}

std::vector<double> predict_probabilities(const LesionViT& model, std::span<const Sample> samples) {
  std::vector<double> probs;
  probs.reserve(samples.size() * model.config().num_classes);
  for (const auto& s : samples)
    for (Scalar p : model.predict(s.image)) probs.push_back(p);
  return probs;
}

MetricsReport evaluate(const LesionViT& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ConfigError("evaluate: empty dataset");
  std::vector<std::size_t> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  return compute_report(predict_probabilities(model, samples), model.config().num_classes, labels);
}

double mean_focus_mass_inside(const LesionViT& model, std::span<const Sample> samples) {
  double total = 0;
  std::size_t counted = 0;
  for (const auto& s : samples) {
    if (!s.mask) continue;
    const Tensor grid = mask_to_patch_grid(*s.mask, model.config().patch_size);
    const Tensor focus = model.attention_record(s.image).focus_map;
    double mass = 0;
    for (std::size_t i = 0; i < grid.numel(); ++i) mass += focus[i] * grid[i];
    total += mass;
    ++counted;
  }
  if (counted == 0) throw ConfigError("no masked samples to measure focus mass");
  return total / static_cast<double>(counted);
}

}  // namespace lesion
