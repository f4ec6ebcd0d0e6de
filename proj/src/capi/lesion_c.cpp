#include "lesion/lesion.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "common/errors.hpp"
#include "data/manifest.hpp"
#include "data/netpbm.hpp"
#include "data/synth.hpp"
#include "model/gradcam.hpp"
#include "training/checkpoint.hpp"
#include "training/trainer.hpp"

struct lsn_config {
  lesion::RunConfig value;
};

struct lsn_dataset {
  std::vector<lesion::Sample> samples;
};

struct lsn_model {
  lesion::RunConfig config;
  lesion::LesionViT vit;
  lesion::AdamState optimizer;
  std::uint64_t global_step = 0;
};

namespace {

thread_local std::string g_last_error;

lsn_status fail(lsn_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
lsn_status guarded(Fn&& fn) {
  try {
    fn();
    return LSN_OK;
  } catch (const lesion::ConfigError& e) {
    return fail(LSN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const lesion::NumericError& e) {
    return fail(LSN_ERR_NUMERIC, e.what());
  } catch (const lesion::DimensionError& e) {
    return fail(LSN_ERR_DATA, e.what());
  } catch (const lesion::ParseError& e) {
    return fail(LSN_ERR_DATA, e.what());
  } catch (const lesion::IoError& e) {
    return fail(LSN_ERR_DATA, e.what());
  } catch (const lesion::UndefinedMetricError& e) {
    return fail(LSN_ERR_DATA, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(LSN_ERR_DATA, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(LSN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(LSN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(LSN_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw lesion::ConfigError(std::string("null argument: ") + what);
}

void copy_out(const std::string& text, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = text.size();
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, text.size());
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
}

lesion::Image image_from(const double* pixels, size_t h, size_t w, size_t c) {
  require(pixels != nullptr, "pixels");
  lesion::Image image(h, w, c);
  for (size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = static_cast<lesion::Scalar>(pixels[i]);
  return image;
}

lsn_metrics to_c(const lesion::MetricsReport& r) {
  lsn_metrics m{};
  m.acc = r.acc;
  m.auc_defined = r.auc_macro.has_value() ? 1 : 0;
  m.auc = r.auc_macro.value_or(std::numeric_limits<double>::quiet_NaN());
  m.f1 = r.f1_macro;
  m.precision = r.precision_macro;
  m.n = r.n;
  m.num_classes = r.confusion.classes();
  return m;
}

lesion::MetricsReport from_c(const lsn_metrics& m, const int64_t* confusion) {
  lesion::MetricsReport r;
  r.acc = m.acc;
  if (m.auc_defined) r.auc_macro = m.auc;
  r.f1_macro = m.f1;
  r.precision_macro = m.precision;
  r.n = m.n;
  r.confusion = lesion::ConfusionMatrix(confusion ? m.num_classes : 0);
  if (confusion)
    for (size_t i = 0; i < m.num_classes; ++i)
      for (size_t j = 0; j < m.num_classes; ++j) r.confusion.at(i, j) = confusion[i * m.num_classes + j];
  return r;
}

}  // namespace

extern "C" {

const char* lsn_last_error(void) { return g_last_error.c_str(); }

int lsn_scalar_bits(void) { return lesion::kScalarBits; }

lsn_status lsn_config_create(lsn_config** out) {
  return guarded([&] {
    require(out != nullptr, "out");
    *out = new lsn_config{};
  });
}

void lsn_config_destroy(lsn_config* config) { delete config; }

lsn_status lsn_config_set(lsn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "config/key/value");
    config->value.set(key, value);
  });
}

lsn_status lsn_config_set_assignment(lsn_config* config, const char* assignment) {
  return guarded([&] {
    require(config && assignment, "config/assignment");
    config->value.set_assignment(assignment);
  });
}

lsn_status lsn_config_dump(const lsn_config* config, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(config != nullptr, "config");
    copy_out(config->value.to_text(), buf, cap, needed);
  });
}

lsn_status lsn_config_keys(char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    std::string joined;
    for (const auto& k : lesion::RunConfig::keys()) joined += (joined.empty() ? "" : ",") + k;
    copy_out(joined, buf, cap, needed);
  });
}

lsn_status lsn_dataset_synth(size_t n, uint64_t seed, size_t height, size_t width, const double* proportions,
                             size_t num_classes, lsn_dataset** out) {
  return guarded([&] {
    require(out && proportions, "out/proportions");
    lesion::SynthConfig cfg;
    cfg.height = height;
    cfg.width = width;
    cfg.num_classes = num_classes;
    cfg.class_proportions.assign(proportions, proportions + num_classes);
    cfg.seed = seed;
    auto ds = std::make_unique<lsn_dataset>();
    ds->samples = lesion::synth_generate(n, cfg);
    *out = ds.release();
  });
}

lsn_status lsn_dataset_write(const lsn_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset && dir, "dataset/dir");
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "masks");
    lesion::Manifest manifest;
    for (const auto& s : dataset->samples) {
      lesion::ManifestRow row;
      row.image_path = "images/" + s.id + ".ppm";
      row.label = s.label;
      lesion::write_netpbm(root / row.image_path, s.image);
      if (s.mask) {
        row.mask_path = "masks/" + s.id + ".pgm";
        lesion::write_netpbm(root / *row.mask_path, *s.mask);
      }
      manifest.rows.push_back(std::move(row));
    }
    std::ofstream out(root / "manifest.csv", std::ios::trunc);
    if (!out) throw lesion::IoError("cannot write " + (root / "manifest.csv").string());
    out << lesion::format_manifest(manifest);
    if (!out) throw lesion::IoError("failed writing " + (root / "manifest.csv").string());
  });
}

lsn_status lsn_dataset_load(const char* manifest_path, const lsn_config* config, lsn_dataset** out) {
  return guarded([&] {
    require(manifest_path && config && out, "manifest_path/config/out");
    const auto manifest = lesion::read_manifest(manifest_path);
    const auto& mc = config->value.model;
    lesion::LoadOptions opts{mc.image_height, mc.image_width, mc.channels, mc.num_classes};
    auto ds = std::make_unique<lsn_dataset>();
    ds->samples = lesion::load_dataset(manifest, opts);
    if (ds->samples.empty()) throw lesion::ParseError(std::string("manifest '") + manifest_path + "' has no rows");
    *out = ds.release();
  });
}

lsn_status lsn_dataset_split(const lsn_dataset* dataset, double eval_fraction, uint64_t seed, lsn_dataset** train,
                             lsn_dataset** eval) {
  return guarded([&] {
    require(dataset && train && eval, "dataset/train/eval");
    auto [tr, ev] = lesion::split_dataset(dataset->samples, eval_fraction, seed);
    auto t = std::make_unique<lsn_dataset>();
    auto e = std::make_unique<lsn_dataset>();
    t->samples = std::move(tr);
    e->samples = std::move(ev);
    *train = t.release();
    *eval = e.release();
  });
}

size_t lsn_dataset_size(const lsn_dataset* dataset) { return dataset ? dataset->samples.size() : 0; }

lsn_status lsn_dataset_label(const lsn_dataset* dataset, size_t index, size_t* label) {
  return guarded([&] {
    require(dataset && label, "dataset/label");
    *label = dataset->samples.at(index).label;
  });
}

lsn_status lsn_dataset_class_counts(const lsn_dataset* dataset, size_t* counts, size_t num_classes) {
  return guarded([&] {
    require(dataset && counts, "dataset/counts");
    std::fill(counts, counts + num_classes, size_t{0});
    for (const auto& s : dataset->samples) {
      if (s.label >= num_classes) throw lesion::ConfigError("label exceeds num_classes");
      ++counts[s.label];
    }
  });
}

void lsn_dataset_destroy(lsn_dataset* dataset) { delete dataset; }

lsn_status lsn_model_create(const lsn_config* config, lsn_model** out) {
  return guarded([&] {
    require(config && out, "config/out");
    config->value.validate();
    lesion::LesionViT vit(config->value.model);
    auto optimizer = lesion::AdamState::zeros_like(vit.params());
    *out = new lsn_model{config->value, std::move(vit), std::move(optimizer), 0};
  });
}

lsn_status lsn_model_load(const char* checkpoint_path, lsn_model** out) {
  return guarded([&] {
    require(checkpoint_path && out, "checkpoint_path/out");
    auto ckpt = lesion::load_checkpoint(checkpoint_path);
    lesion::LesionViT vit(ckpt.config.model, std::move(ckpt.params));
    auto optimizer = ckpt.optimizer ? std::move(*ckpt.optimizer) : lesion::AdamState::zeros_like(vit.params());
    *out = new lsn_model{ckpt.config, std::move(vit), std::move(optimizer), ckpt.global_step};
  });
}

lsn_status lsn_model_save(const lsn_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model && checkpoint_path, "model/checkpoint_path");
    lesion::Checkpoint ckpt;
    ckpt.config = model->config;
    ckpt.params = model->vit.params();
    ckpt.optimizer = model->optimizer;
    ckpt.global_step = model->global_step;
    lesion::save_checkpoint(checkpoint_path, ckpt);
  });
}

lsn_status lsn_model_config(const lsn_model* model, lsn_config** out) {
  return guarded([&] {
    require(model && out, "model/out");
    *out = new lsn_config{model->config};
  });
}

size_t lsn_model_num_classes(const lsn_model* model) { return model ? model->config.model.num_classes : 0; }

uint64_t lsn_model_global_step(const lsn_model* model) { return model ? model->global_step : 0; }

void lsn_model_destroy(lsn_model* model) { delete model; }

lsn_status lsn_model_predict(const lsn_model* model, const double* pixels, size_t height, size_t width,
                             size_t channels, double* probs, size_t num_classes) {
  return guarded([&] {
    require(model && probs, "model/probs");
    if (num_classes != model->config.model.num_classes)
      throw lesion::ConfigError("probs buffer has " + std::to_string(num_classes) + " slots, model has " +
                                std::to_string(model->config.model.num_classes) + " classes");
    const auto p = model->vit.predict(image_from(pixels, height, width, channels));
    for (size_t i = 0; i < p.size(); ++i) probs[i] = p[i];
  });
}

lsn_status lsn_train(lsn_model* model, const lsn_dataset* train, uint64_t max_steps, const char* log_path,
                     lsn_step_callback callback, void* user) {
  return guarded([&] {
    require(model && train, "model/train");
    lesion::Trainer trainer(model->vit, model->config.train, train->samples, model->optimizer, model->global_step);
    std::ofstream log;
    if (log_path) {
      const bool fresh = model->global_step == 0;
      log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
      if (!log) throw lesion::IoError(std::string("cannot write log '") + log_path + "'");
      if (fresh) log << lesion::kStepLogHeader << '\n';
    }
    uint64_t done = 0;
    while (!trainer.finished() && (max_steps == 0 || done < max_steps)) {
      const auto entry = trainer.step();
      ++done;
      if (log) log << lesion::format_step_log(entry) << '\n';
      if (callback) {
        model->vit = trainer.model();
        model->optimizer = trainer.optimizer();
        model->global_step = trainer.global_step();
        const lsn_step_log c{entry.step, entry.epoch, entry.loss.l_ce, entry.loss.l_attn, entry.loss.lambda_attn,
                             entry.loss.total};
        if (callback(&c, user)) break;
      }
    }
    model->vit = trainer.model();
    model->optimizer = trainer.optimizer();
    model->global_step = trainer.global_step();
  });
}

lsn_status lsn_evaluate(const lsn_model* model, const lsn_dataset* dataset, lsn_metrics* out, int64_t* confusion,
                        size_t confusion_cap) {
  return guarded([&] {
    require(model && dataset && out, "model/dataset/out");
    const auto report = lesion::evaluate(model->vit, dataset->samples);
    *out = to_c(report);
    if (confusion) {
      const auto& counts = report.confusion.counts();
      if (confusion_cap < counts.size()) throw lesion::ConfigError("confusion buffer too small");
      std::copy(counts.begin(), counts.end(), confusion);
    }
  });
}

lsn_status lsn_focus_mass(const lsn_model* model, const lsn_dataset* dataset, double* out) {
  return guarded([&] {
    require(model && dataset && out, "model/dataset/out");
    *out = lesion::mean_focus_mass_inside(model->vit, dataset->samples);
  });
}

lsn_status lsn_metrics_table(const lsn_metrics* metrics, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(metrics != nullptr, "metrics");
    copy_out(lesion::format_report_table(from_c(*metrics, nullptr)), buf, cap, needed);
  });
}

lsn_status lsn_metrics_lines(const lsn_metrics* metrics, const int64_t* confusion, char* buf, size_t cap,
                             size_t* needed) {
  return guarded([&] {
    require(metrics != nullptr, "metrics");
    copy_out(lesion::format_report_lines(from_c(*metrics, confusion)), buf, cap, needed);
  });
}

lsn_status lsn_gradcam(const lsn_model* model, const double* pixels, size_t height, size_t width, size_t channels,
                       size_t target_class, double* grid, size_t grid_cap, size_t* argmax_row, size_t* argmax_col) {
  return guarded([&] {
    require(model && grid, "model/grid");
    const auto cam = lesion::grad_cam(model->vit, image_from(pixels, height, width, channels), target_class);
    if (grid_cap < cam.grid.numel()) throw lesion::ConfigError("grid buffer too small");
    for (size_t i = 0; i < cam.grid.numel(); ++i) grid[i] = cam.grid[i];
    if (argmax_row) *argmax_row = cam.argmax_row;
    if (argmax_col) *argmax_col = cam.argmax_col;
  });
}

lsn_status lsn_gradcam_files(const lsn_model* model, const char* image_path, size_t target_class, const char* prefix,
                             size_t* argmax_row, size_t* argmax_col) {
  return guarded([&] {
    require(model && image_path && prefix, "model/image_path/prefix");
    const auto& mc = model->config.model;
    if (target_class >= mc.num_classes)
      throw lesion::ConfigError("class " + std::to_string(target_class) + " out of range [0, " +
                                std::to_string(mc.num_classes) + ")");
    lesion::Image image = lesion::read_netpbm(image_path);
    if (image.channels != mc.channels)
      throw lesion::DimensionError("image '" + std::string(image_path) + "' is " + image.dims() + ", model expects " +
                                   std::to_string(mc.image_height) + "x" + std::to_string(mc.image_width) + "x" +
                                   std::to_string(mc.channels));
    image = lesion::resize_nearest(image, mc.image_height, mc.image_width);
    const auto cam = lesion::grad_cam(model->vit, image, target_class);

    lesion::Image heat(image.height, image.width, 1);
    for (size_t i = 0; i < cam.upsampled.numel(); ++i) heat.pixels[i] = cam.upsampled[i];
    lesion::Image overlay(image.height, image.width, 3);
    for (size_t y = 0; y < image.height; ++y) {
      for (size_t x = 0; x < image.width; ++x) {
        for (size_t c = 0; c < 3; ++c) {
          const lesion::Scalar base = image.at(y, x, image.channels == 3 ? c : 0);
          const lesion::Scalar layer = c == 0 ? heat.at(y, x) : lesion::Scalar(0);
          overlay.at(y, x, c) = lesion::Scalar(0.5) * base + lesion::Scalar(0.5) * layer;
        }
      }
    }
    const std::string p(prefix);
    lesion::write_netpbm(p + ".heat.pgm", heat);
    lesion::write_netpbm(p + ".overlay.ppm", overlay);
    if (argmax_row) *argmax_row = cam.argmax_row;
    if (argmax_col) *argmax_col = cam.argmax_col;
  });
}

}  // extern "C"
