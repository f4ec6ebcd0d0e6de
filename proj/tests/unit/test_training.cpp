#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/errors.hpp"
#include "data/synth.hpp"
#include "doctest.h"
#include "metrics/metrics.hpp"
#include "numerics/ops.hpp"
#include "training/adam.hpp"
#include "training/checkpoint.hpp"
#include "training/run_config.hpp"
#include "training/trainer.hpp"

using namespace lesion;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> tiny_data(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.height = cfg.width = 8;
  cfg.seed = seed;
  return synth_generate(n, cfg);
}

TrainConfig quick_train(std::size_t epochs = 2) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.learning_rate = 1e-3;
  return t;
}


std::vector<double> losses_of(const std::vector<StepLog>& logs) {
  std::vector<double> out;
  for (const auto& l : logs) out.push_back(l.loss.total);
  return out;
}

}  // namespace

TEST_CASE("adam: zero gradients leave parameters and moments unchanged") {
  const ModelConfig c = tiny_model_config();
  ModelParams p = ModelParams::initialize(c);
  const ModelParams before = p;
  AdamState state = AdamState::zeros_like(p);
  const AdamState zero_state = state;
  std::vector<Tensor> grads;
  for (const auto& e : p) grads.push_back(Tensor::zeros(e.value.shape()));
  adam_step(p, grads, state, {}, 0.1);
  CHECK(p == before);
  CHECK(state.first_moment == zero_state.first_moment);
  CHECK(state.second_moment == zero_state.second_moment);
  CHECK(state.step == 1);
}

TEST_CASE("adam: first step with unit gradient moves by the learning rate") {
  const ModelConfig c = tiny_model_config();
  ModelParams p = ModelParams::initialize(c);
  const ModelParams before = p;
  AdamState state = AdamState::zeros_like(p);
  std::vector<Tensor> grads;
  for (const auto& e : p) grads.push_back(Tensor(e.value.shape(), Scalar(1)));
  adam_step(p, grads, state, {}, 0.1);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].value.numel(); ++j)
      CHECK(p[i].value[j] - before[i].value[j] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam: minimizes x^2 within 100 steps") {
  const ModelConfig c = tiny_model_config();
  ModelParams p = ModelParams::zeros_like(c);
  Tensor& x = p.get("head.bias");
  x = Tensor(x.shape(), Scalar(1));
  AdamState state = AdamState::zeros_like(p);
  for (int step = 0; step < 100; ++step) {
    std::vector<Tensor> grads;
    for (const auto& e : p) grads.push_back(Tensor::zeros(e.value.shape()));
    Tape tape;
    const Var v = tape.variable(x);
    tape.backward(ops::sum(ops::mul(v, v)));
    grads[p.index_of("head.bias")] = v.grad();
    adam_step(p, grads, state, {}, 0.1);
  }
  for (auto v : x.data()) CHECK(std::abs(v) < 0.1);
}

TEST_CASE("adam: NaN gradient aborts naming the parameter") {
  const ModelConfig c = tiny_model_config();
  ModelParams p = ModelParams::initialize(c);
  const ModelParams before = p;
  AdamState state = AdamState::zeros_like(p);
  std::vector<Tensor> grads;
  for (const auto& e : p) grads.push_back(Tensor::zeros(e.value.shape()));
  grads[p.index_of("blocks.0.attn.wk")][3] = std::numeric_limits<Scalar>::quiet_NaN();
  try {
    adam_step(p, grads, state, {}, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("blocks.0.attn.wk") != std::string::npos);
  }
  CHECK(p == before);
  CHECK(state.step == 0);
}

TEST_CASE("training: lambda zero matches training without masks, step for step") {
  const ModelConfig c = tiny_model_config();
  auto data = tiny_data(10, 3);
  auto unmasked = data;
  for (auto& s : unmasked) s.mask.reset();
  TrainConfig t = quick_train();
  t.lambda_attn = 0;
  Trainer a(LesionViT(c), t, data), b(LesionViT(c), t, unmasked);
  const auto la = a.train_epoch(), lb = b.train_epoch();
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].loss.l_ce == lb[i].loss.l_ce);
    CHECK(la[i].loss.total == lb[i].loss.total);
  }
  CHECK(a.model().params() == b.model().params());
  CHECK(a.optimizer() == b.optimizer());
}

TEST_CASE("training: zero learning rate leaves parameters untouched") {
  const ModelConfig c = tiny_model_config();
  TrainConfig t = quick_train();
  t.learning_rate = 0;
  const LesionViT model(c);
  Trainer trainer(model, t, tiny_data(10, 4));
  trainer.train_epoch();
  CHECK(trainer.model().params() == model.params());
}

TEST_CASE("training: mean cross entropy decreases over the first five epochs") {
  const ModelConfig c = tiny_model_config();
  TrainConfig t;
  t.epochs = 5;
  t.augment = {};  // identical inputs each epoch, so epoch means are comparable
  Trainer trainer(LesionViT(c), t, tiny_data(16, 5));
  double previous = 1e300;
  for (int epoch = 0; epoch < 5; ++epoch) {
    const auto logs = trainer.train_epoch();
    double mean = 0;
    for (const auto& l : logs) mean += l.loss.l_ce / double(logs.size());
    CHECK_MESSAGE(mean < previous, "epoch " << epoch << " mean l_ce " << mean);
    previous = mean;
  }
  CHECK(trainer.finished());
}

TEST_CASE("training: logs are consistent and the last partial batch is kept") {
  const ModelConfig c = tiny_model_config();
  TrainConfig t = quick_train(1);
  Trainer trainer(LesionViT(c), t, tiny_data(10, 6));
  CHECK(trainer.steps_per_epoch() == 3);
  const auto logs = trainer.train_epoch();
  REQUIRE(logs.size() == 3);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(logs[i].step == i + 1);
    CHECK(logs[i].epoch == 0);
    CHECK(logs[i].loss.l_ce >= 0);
    CHECK(logs[i].loss.l_attn >= 0);
    CHECK(logs[i].loss.total == logs[i].loss.l_ce + t.lambda_attn * logs[i].loss.l_attn);
  }
  const std::string line = format_step_log(logs[0]);
  CHECK(line.rfind("1,0,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 4);
  CHECK(trainer.model().params().all_finite());
}

TEST_CASE("training: runs are deterministic") {
  const ModelConfig c = tiny_model_config();
  const auto data = tiny_data(12, 7);
  Trainer a(LesionViT(c), quick_train(), data), b(LesionViT(c), quick_train(), data);
  CHECK(losses_of(a.train_steps(6)) == losses_of(b.train_steps(6)));
  CHECK(a.model().params() == b.model().params());
}

TEST_CASE("training: every parameter receives gradient on a masked batch") {
  const ModelConfig c = tiny_model_config();
  TrainConfig t = quick_train(1);
  t.augment = {};
  Trainer trainer(LesionViT(c), t, tiny_data(8, 8));
  trainer.step();
  const auto& grads = trainer.last_gradients();
  REQUIRE(grads.size() == trainer.model().params().size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double mag = 0;
    for (auto g : grads[i].data()) mag += std::abs(g);
    CHECK_MESSAGE(mag > 0, trainer.model().params()[i].name);
  }
}

TEST_CASE("training: dynamic weights track the sampled stream") {
  const ModelConfig c = tiny_model_config();
  TrainConfig t = quick_train(1);
  t.dynamic_weights = true;
  const auto data = tiny_data(20, 9);
  Trainer trainer(LesionViT(c), t, data);
  trainer.train_epoch();
  const auto f = class_frequencies(std::span<const Sample>(data), 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(trainer.class_weights_in_use().frequencies[j] == f[j]);
}

TEST_CASE("evaluate: composition of the metric functions and determinism") {
  const ModelConfig c = tiny_model_config();
  const LesionViT model(c);
  const auto data = tiny_data(15, 10);
  const MetricsReport r = evaluate(model, data);
  const MetricsReport again = evaluate(model, data);
  CHECK(r.acc == again.acc);
  CHECK(r.confusion == again.confusion);

  const auto probs = predict_probabilities(model, data);
  std::vector<std::size_t> labels, preds;
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels.push_back(data[i].label);
    preds.push_back(static_cast<std::size_t>(std::max_element(probs.begin() + i * 3, probs.begin() + i * 3 + 3) -
                                             (probs.begin() + i * 3)));
  }
  const ConfusionMatrix cm = confusion_matrix(preds, labels, 3);
  CHECK(r.confusion == cm);
  CHECK(r.acc == accuracy(cm));
  CHECK(r.f1_macro == f1_macro(cm));
  CHECK(r.precision_macro == precision_macro(cm));
  REQUIRE(r.auc_macro.has_value());
  CHECK(*r.auc_macro == roc_auc_ovr_macro(probs, 3, labels));

  const auto p = model.predict(data[0].image);
  Sample single = data[0];
  single.label = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  CHECK(evaluate(model, std::vector<Sample>{single}).acc == 1.0);
}

TEST_CASE("checkpoint: round trip, byte stability, corruption") {
  const ModelConfig c = tiny_model_config();
  RunConfig rc;
  rc.model = c;
  rc.train = quick_train();
  Trainer trainer(LesionViT(c), rc.train, tiny_data(8, 11));
  trainer.train_steps(2);
  Checkpoint ck{kCheckpointVersion, rc, trainer.model().params(), trainer.optimizer(), trainer.global_step()};
  const auto bytes = encode_checkpoint(ck);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "LSNFRMT1");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back == ck);
  CHECK(encode_checkpoint(back) == bytes);

  const fs::path dir = fs::temp_directory_path() / "lesion_unit_ckpt";
  fs::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", ck);
  CHECK(load_checkpoint(dir / "a.ckpt") == ck);

  auto corrupt = bytes;
  corrupt[0] = 'X';
  try {
    decode_checkpoint(corrupt);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 5);
  CHECK_THROWS_AS(decode_checkpoint(cut), ParseError);

  std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("format_version=1");
  REQUIRE(pos != std::string::npos);
  text[pos + 15] = '9';
  try {
    decode_checkpoint(std::vector<std::uint8_t>(text.begin(), text.end()));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("checkpoint: 32-bit element encoding stays within float precision") {
  const ModelConfig c = tiny_model_config();
  RunConfig rc;
  rc.model = c;
  Checkpoint ck{kCheckpointVersion, rc, ModelParams::initialize(c), std::nullopt, 0};
  const auto narrow = encode_checkpoint(ck, 32);
  const Checkpoint back = decode_checkpoint(narrow);
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    for (std::size_t j = 0; j < ck.params[i].value.numel(); ++j)
      CHECK(back.params[i].value[j] == Scalar(static_cast<float>(ck.params[i].value[j])));
  CHECK(encode_checkpoint(back, 32) == narrow);
}

TEST_CASE("resume: 5 + 5 steps equal 10 uninterrupted steps") {
  const ModelConfig c = tiny_model_config();
  RunConfig rc;
  rc.model = c;
  rc.train = quick_train(3);
  const auto data = tiny_data(12, 12);

  Trainer straight(LesionViT(c), rc.train, data);
  const auto full = losses_of(straight.train_steps(10));

  Trainer first(LesionViT(c), rc.train, data);
  auto partial = losses_of(first.train_steps(5));
  const Checkpoint ck =
      decode_checkpoint(encode_checkpoint({kCheckpointVersion, rc, first.model().params(), first.optimizer(), 5}));
  Trainer resumed(LesionViT(ck.config.model, ck.params), ck.config.train, data, *ck.optimizer, ck.global_step);
  const auto rest = losses_of(resumed.train_steps(5));
  partial.insert(partial.end(), rest.begin(), rest.end());

  CHECK(partial == full);
  CHECK(resumed.model().params() == straight.model().params());
  CHECK(resumed.optimizer() == straight.optimizer());
}

TEST_CASE("run config: keys, text round trip, errors") {
  RunConfig rc;
  rc.set("embed_dim", "16");
  rc.set_assignment("lambda_attn=0.25");
  rc.set("augment", "rot90,hflip");
  rc.set("attn_mode", "literal");
  rc.set("seed", "42");
  CHECK(rc.model.embed_dim == 16);
  CHECK(rc.train.lambda_attn == 0.25);
  CHECK(rc.model.seed == 42);
  CHECK(rc.train.seed == 42);
  rc.set("model_seed", "3");
  CHECK(rc.model.seed == 3);
  CHECK(rc.train.seed == 42);
  CHECK(RunConfig::from_text(rc.to_text()) == rc);
  CHECK(RunConfig::from_text(rc.to_text()).to_text() == rc.to_text());
  try {
    rc.set("colour", "blue");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lambda_attn") != std::string::npos);
  }
  CHECK_THROWS_AS(rc.set("batch_size", "zero"), ConfigError);
  CHECK_THROWS_AS(rc.set_assignment("novalue"), ConfigError);
  TrainConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ModelConfig odd;
  odd.image_height = 30;
  CHECK_THROWS_AS(odd.validate(), ConfigError);
  CHECK(format_double(0.1) == "0.1");
}
