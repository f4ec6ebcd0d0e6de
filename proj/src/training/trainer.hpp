#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "data/sample.hpp"
#include "losses/losses.hpp"
#include "metrics/metrics.hpp"
#include "model/vit.hpp"
#include "training/adam.hpp"
#include "training/run_config.hpp"

namespace lesion {

struct StepLog {
  std::uint64_t step = 0;  // 1-based global step
  std::uint64_t epoch = 0;
  LossBreakdown loss;
};

// `step,epoch,l_ce,l_attn,total`
std::string format_step_log(const StepLog& log);
inline constexpr const char* kStepLogHeader = "step,epoch,l_ce,l_attn,total";

// Single-threaded training state. The batch order and augmentation of every
// step derive from (seed, global step), so a checkpoint only needs the step
// counter to resume the exact stream.
class Trainer {
 public:
  Trainer(LesionViT model, TrainConfig config, std::vector<Sample> train_set);

  // Resume from saved optimizer state at `global_step`.
  Trainer(LesionViT model, TrainConfig config, std::vector<Sample> train_set, AdamState optimizer,
          std::uint64_t global_step);

  StepLog step();
  std::vector<StepLog> train_epoch();
  std::vector<StepLog> train_steps(std::size_t count);
  bool finished() const { return global_step_ >= total_steps(); }

  const LesionViT& model() const { return model_; }
  const AdamState& optimizer() const { return optimizer_; }
  const TrainConfig& config() const { return config_; }
  const ClassWeights& class_weights_in_use() const { return weights_; }
  std::uint64_t global_step() const { return global_step_; }
  std::size_t steps_per_epoch() const;
  std::uint64_t total_steps() const { return config_.epochs * steps_per_epoch(); }

  // Gradients of the most recent step, in parameter order.
  const std::vector<Tensor>& last_gradients() const { return last_grads_; }

 private:
  std::vector<std::size_t> epoch_order(std::uint64_t epoch) const;
  double learning_rate_at(std::uint64_t step) const;

  LesionViT model_;
  TrainConfig config_;
  std::vector<Sample> train_set_;
  ClassWeights weights_;
  AdamState optimizer_;
  std::uint64_t global_step_ = 0;
  std::vector<Tensor> last_grads_;
};

// Gradient-free pass over the data; probabilities in sample order.
std::vector<double> predict_probabilities(const LesionViT& model, std::span<const Sample> samples);

MetricsReport evaluate(const LesionViT& model, std::span<const Sample> samples);

// Mean over masked samples of the focus-map mass on the patch-grid mask.
double mean_focus_mass_inside(const LesionViT& model, std::span<const Sample> samples);

}  // namespace lesion
