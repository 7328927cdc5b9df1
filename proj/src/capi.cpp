#include "cooc/cooc.h"

#include <cstring>
#include <new>
#include <string>

#include "cooc/classifier.hpp"
#include "cooc/codebook.hpp"
#include "cooc/kernels.hpp"
#include "cooc/pipeline.hpp"

struct cooc_config {
  cooc::Settings settings;
};
struct cooc_image {
  cooc::CodewordImage value;
};
struct cooc_codebook {
  cooc::Codebook value;
};
struct cooc_descriptor {
  cooc::CoocDescriptor value;
};
struct cooc_model {
  cooc::LinearModel value;
};

namespace {

thread_local std::string g_last_error;

template <class F>
cooc_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return COOC_OK;
  } catch (const cooc::Error& e) {
    g_last_error = e.what();
    return static_cast<cooc_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return COOC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return COOC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return COOC_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) cooc::fail(cooc::ErrorCode::argument, std::string(what) + " is NULL");
}

cooc::LogFn make_log(cooc_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

template <class F>
auto config_stage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const cooc::Error& e) {
    throw cooc::Error(e.code(), std::string("[config] ") + e.what());
  }
}

cooc::PipelineConfig pipeline_config(const cooc_config* cfg) {
  require(cfg, "config");
  return config_stage([&] { return cooc::PipelineConfig::from_settings(cfg->settings); });
}

}  // namespace

extern "C" {

const char* cooc_version(void) { return "1.0.0"; }

const char* cooc_status_string(cooc_status status) {
  switch (status) {
    case COOC_OK: return "ok";
    case COOC_ERR_INTERNAL: return "internal error";
    default:
      if (status >= COOC_ERR_IO && status <= COOC_ERR_EVALUATION)
        return cooc::to_string(static_cast<cooc::ErrorCode>(static_cast<int>(status)));
      return "unknown status";
  }
}

const char* cooc_last_error(void) { return g_last_error.c_str(); }

cooc_status cooc_config_new(cooc_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new cooc_config{};
  });
}

cooc_status cooc_config_load(const char* path, cooc_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cooc_config{config_stage([&] { return cooc::Settings::load(path); })};
  });
}

cooc_status cooc_config_set(cooc_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->settings.set(key, value);
  });
}

void cooc_config_free(cooc_config* cfg) { delete cfg; }

cooc_status cooc_cmd_synth(const cooc_config* cfg, cooc_log_fn log, void* user) {
  return guard([&] {
    require(cfg, "config");
    std::filesystem::path out = ".";
    const auto sc = config_stage([&] { return cooc::synth_config_from_settings(cfg->settings, &out); });
    cooc::cmd_synth(sc, out, make_log(log, user));
  });
}

cooc_status cooc_cmd_train_codebook(const cooc_config* cfg, cooc_log_fn log, void* user) {
  return guard([&] { cooc::cmd_train_codebook(pipeline_config(cfg), make_log(log, user)); });
}

cooc_status cooc_cmd_encode(const cooc_config* cfg, cooc_log_fn log, void* user) {
  return guard([&] { cooc::cmd_encode(pipeline_config(cfg), make_log(log, user)); });
}

cooc_status cooc_cmd_run(const cooc_config* cfg, cooc_log_fn log, void* user, double* rates, size_t capacity,
                         size_t* count) {
  return guard([&] {
    const auto r = cooc::cmd_run(pipeline_config(cfg), make_log(log, user));
    if (rates)
      for (size_t i = 0; i < capacity && i < r.curve.rates.size(); ++i) rates[i] = r.curve.rates[i];
    if (count) *count = r.curve.rates.size();
  });
}

cooc_status cooc_image_new(uint32_t width, uint32_t height, uint32_t codewords, const uint16_t* labels,
                           cooc_image** out) {
  return guard([&] {
    require(labels, "labels");
    require(out, "out");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    *out = new cooc_image{cooc::CodewordImage(static_cast<int>(width), static_cast<int>(height),
                                              static_cast<int>(codewords),
                                              std::vector<std::uint16_t>(labels, labels + n))};
  });
}

cooc_status cooc_image_load(const char* path, cooc_image** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cooc_image{cooc::load_cwim(path)};
  });
}

cooc_status cooc_image_save(const cooc_image* img, const char* path) {
  return guard([&] {
    require(img, "image");
    require(path, "path");
    cooc::save_cwim(img->value, path);
  });
}

uint32_t cooc_image_width(const cooc_image* img) { return img ? static_cast<uint32_t>(img->value.width()) : 0; }
uint32_t cooc_image_height(const cooc_image* img) { return img ? static_cast<uint32_t>(img->value.height()) : 0; }
uint32_t cooc_image_codewords(const cooc_image* img) {
  return img ? static_cast<uint32_t>(img->value.codewords()) : 0;
}

cooc_status cooc_image_label(const cooc_image* img, uint32_t row, uint32_t col, uint16_t* out) {
  return guard([&] {
    require(img, "image");
    require(out, "out");
    if (row >= static_cast<uint32_t>(img->value.height()) || col >= static_cast<uint32_t>(img->value.width()))
      cooc::fail(cooc::ErrorCode::index, "pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                                             ") outside the codeword image");
    *out = img->value.label(static_cast<int>(row), static_cast<int>(col));
  });
}

void cooc_image_free(cooc_image* img) { delete img; }

cooc_status cooc_codebook_load(const char* path, cooc_codebook** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cooc_codebook{cooc::load_codebook(path)};
  });
}

uint32_t cooc_codebook_size(const cooc_codebook* cb) { return cb ? static_cast<uint32_t>(cb->value.codewords) : 0; }
uint32_t cooc_codebook_dim(const cooc_codebook* cb) { return cb ? static_cast<uint32_t>(cb->value.dim) : 0; }

cooc_status cooc_codebook_encode_raster(const cooc_codebook* cb, const char* raster_path, uint32_t patch_size,
                                        uint32_t stride, cooc_image** out) {
  return guard([&] {
    require(cb, "codebook");
    require(raster_path, "raster_path");
    require(out, "out");
    const auto img = cooc::load_image(raster_path);
    *out = new cooc_image{cooc::encode(cb->value, img, static_cast<int>(patch_size), static_cast<int>(stride))};
  });
}

void cooc_codebook_free(cooc_codebook* cb) { delete cb; }

cooc_status cooc_descriptor_compute(const cooc_image* img1, const cooc_image* img2, const char* kernel, double sigma,
                                    cooc_descriptor** out) {
  return guard([&] {
    require(img1, "img1");
    require(img2, "img2");
    require(kernel, "kernel");
    require(out, "out");
    const cooc::SpatialKernelConfig cfg{cooc::parse_kernel_kind(kernel), sigma};
    *out = new cooc_descriptor{cooc::descriptor(img1->value, img2->value, cfg)};
  });
}

cooc_status cooc_descriptor_load(const char* path, cooc_descriptor** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cooc_descriptor{cooc::decode_descriptor(cooc::read_file(path))};
  });
}

cooc_status cooc_descriptor_save(const cooc_descriptor* d, const char* path) {
  return guard([&] {
    require(d, "descriptor");
    require(path, "path");
    cooc::write_file(path, cooc::encode_descriptor(d->value));
  });
}

uint32_t cooc_descriptor_codewords(const cooc_descriptor* d) {
  return d ? static_cast<uint32_t>(d->value.codewords()) : 0;
}

size_t cooc_descriptor_nnz(const cooc_descriptor* d) { return d ? d->value.nnz() : 0; }

cooc_status cooc_descriptor_value(const cooc_descriptor* d, uint32_t m, uint32_t n, double* out) {
  return guard([&] {
    require(d, "descriptor");
    require(out, "out");
    *out = d->value.value(static_cast<int>(m), static_cast<int>(n));
  });
}

cooc_status cooc_descriptor_normalize(cooc_descriptor* d, double max_value) {
  return guard([&] {
    require(d, "descriptor");
    d->value = cooc::minmax_apply(d->value, max_value);
  });
}

void cooc_descriptor_free(cooc_descriptor* d) { delete d; }

cooc_status cooc_model_load(const char* path, cooc_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cooc_model{cooc::load_model(path)};
  });
}

double cooc_model_bias(const cooc_model* model) { return model ? model->value.bias : 0.0; }
double cooc_model_c(const cooc_model* model) { return model ? model->value.c : 0.0; }

cooc_status cooc_model_score(const cooc_model* model, const cooc_descriptor* d, double* out) {
  return guard([&] {
    require(model, "model");
    require(d, "descriptor");
    require(out, "out");
    *out = cooc::decision_score(model->value, d->value);
  });
}

void cooc_model_free(cooc_model* model) { delete model; }

}  // extern "C"
