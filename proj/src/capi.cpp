// C ABI over the core library. Exceptions stop here: every entry point maps
// udvd::Error codes onto udvd_status values and stashes the message in a
// thread-local buffer for udvd_last_error().

#include "udvd/udvd.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/bench.hpp"
#include "core/degrade.hpp"
#include "core/gradcheck.hpp"
#include "core/image_io.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/pca.hpp"
#include "core/train.hpp"
#include "core/viz.hpp"

namespace {

namespace fs = std::filesystem;

thread_local std::string g_error;

template <typename Fn>
int guarded(Fn&& fn) {
  g_error.clear();
  try {
    return fn();
  } catch (const udvd::Error& e) {
    g_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    g_error = e.what();
    return UDVD_ERR_INTERNAL;
  } catch (...) {
    g_error = "unidentified failure";
    return UDVD_ERR_INTERNAL;
  }
}

int param_error(const char* msg) {
  g_error = msg;
  return UDVD_ERR_PARAM;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) udvd::fail(udvd::ErrorCode::Io, "cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Filenames of the .png files directly inside dir, sorted so results do not
// depend on directory enumeration order.
std::vector<std::string> png_names(const std::string& dir) {
  if (!fs::is_directory(dir)) udvd::fail(udvd::ErrorCode::Io, "not a directory: ", dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

udvd::Tensor degradation_map(const std::string& basis_path, double eps, double sigma, int h,
                             int w) {
  udvd::PcaBasis basis = udvd::load_basis(basis_path);
  return udvd::encode_degradation(basis, eps, sigma, h, w);
}

}  // namespace

struct udvd_model {
  udvd::UdvdModel model;
};

extern "C" {

const char* udvd_version(void) { return "1.0.0"; }

const char* udvd_last_error(void) { return g_error.c_str(); }

void udvd_string_free(char* s) { std::free(s); }

int udvd_degrade_file(const char* hr_png, const char* lr_png, double eps, double sigma, int scale,
                      uint64_t seed, const char* basis_path, const char* map_out) {
  if (!hr_png || !lr_png) return param_error("degrade: null path");
  return guarded([&] {
    udvd::Tensor hr = udvd::read_png(hr_png);
    udvd::DegradationParams p{eps, sigma, scale, seed};
    udvd::validate(p);
    udvd::Tensor lr = udvd::degrade(hr, p);
    udvd::write_png(lr, lr_png);
    if (map_out) {
      udvd::PcaBasis basis = basis_path ? udvd::load_basis(basis_path) : udvd::pca_fit();
      udvd::save_tensor(udvd::encode_degradation(basis, eps, sigma, lr.h(), lr.w()), map_out);
    }
    return UDVD_OK;
  });
}

int udvd_degrade_spatial_file(const char* hr_png, const char* lr_png, double eps_lo, double eps_hi,
                              double sigma_lo, double sigma_hi, int scale, uint64_t seed,
                              const char* basis_path, const char* map_out) {
  if (!hr_png || !lr_png) return param_error("degrade-spatial: null path");
  return guarded([&] {
    udvd::Tensor hr = udvd::read_png(hr_png);
    udvd::SpatialDegradation p{eps_lo, eps_hi, sigma_lo, sigma_hi, scale, seed};
    udvd::validate(p);
    udvd::Tensor lr = udvd::degrade_spatial(hr, p);
    udvd::write_png(lr, lr_png);
    if (map_out) {
      udvd::PcaBasis basis = basis_path ? udvd::load_basis(basis_path) : udvd::pca_fit();
      udvd::save_tensor(udvd::encode_degradation_spatial(
                            basis, udvd::column_ramp(eps_lo, eps_hi, lr.w()),
                            udvd::column_ramp(sigma_lo, sigma_hi, lr.w()), lr.h()),
                        map_out);
    }
    return UDVD_OK;
  });
}

int udvd_pca_fit_file(const char* out_path, int components, int samples, int kernel_size) {
  if (!out_path) return param_error("pca-fit: null path");
  return guarded([&] {
    udvd::save_basis(udvd::pca_fit(components, samples, kernel_size), out_path);
    return UDVD_OK;
  });
}

int udvd_model_load(const char* checkpoint, udvd_model** out) {
  if (!checkpoint || !out) return param_error("model-load: null argument");
  *out = nullptr;
  return guarded([&] {
    udvd::LoadedCheckpoint lc = udvd::load_checkpoint(checkpoint);
    *out = new udvd_model{std::move(lc.model)};
    return UDVD_OK;
  });
}

void udvd_model_free(udvd_model* model) { delete model; }

int udvd_model_scale(const udvd_model* model) {
  if (!model) return -static_cast<int>(param_error("model-scale: null model"));
  return model->model.config().scale;
}

int udvd_model_infer_file(const udvd_model* model, const char* lr_png, const char* basis_path,
                          double eps, double sigma, const char* out_png) {
  if (!model || !lr_png || !basis_path || !out_png) return param_error("infer: null argument");
  return guarded([&] {
    udvd::Tensor lr = udvd::read_png(lr_png);
    udvd::Tensor dmap = degradation_map(basis_path, eps, sigma, lr.h(), lr.w());
    udvd::write_png(model->model.infer(lr, dmap), out_png);
    return UDVD_OK;
  });
}

int udvd_model_viz_file(const udvd_model* model, const char* lr_png, const char* basis_path,
                        double eps_a, double sigma_a, double eps_b, double sigma_b,
                        int block_index, const char* out_png) {
  if (!model || !lr_png || !basis_path || !out_png)
    return param_error("viz-kernels: null argument");
  return guarded([&] {
    udvd::Tensor lr = udvd::read_png(lr_png);
    udvd::PcaBasis basis = udvd::load_basis(basis_path);
    udvd::Tensor map_a = udvd::encode_degradation(basis, eps_a, sigma_a, lr.h(), lr.w());
    udvd::Tensor map_b = udvd::encode_degradation(basis, eps_b, sigma_b, lr.h(), lr.w());
    udvd::export_kernel_viz(model->model, lr, map_a, map_b, block_index, out_png);
    return UDVD_OK;
  });
}

int udvd_train_run(const char* config_path, const char* data_dir, const char* basis_path,
                   const char* resume_checkpoint, const char* checkpoint_out, const char* log_csv,
                   int64_t* final_step, double* final_loss) {
  if (!config_path || !data_dir || !checkpoint_out) return param_error("train: null argument");
  return guarded([&] {
    udvd::TrainConfig cfg = udvd::TrainConfig::from_json(slurp(config_path));

    std::vector<udvd::Tensor> corpus;
    for (const std::string& name : png_names(data_dir))
      corpus.push_back(udvd::read_png((fs::path(data_dir) / name).string()));
    if (corpus.empty()) udvd::fail(udvd::ErrorCode::Io, "no .png images in ", data_dir);

    udvd::PcaBasis basis = basis_path ? udvd::load_basis(basis_path) : udvd::pca_fit();

    udvd::Adam opt;
    int64_t start = 0;
    udvd::UdvdModel model(cfg.model, cfg.seed);
    if (resume_checkpoint) {
      udvd::LoadedCheckpoint lc = udvd::load_checkpoint(resume_checkpoint, &opt);
      if (lc.model.config().to_json() != cfg.model.to_json())
        udvd::fail(udvd::ErrorCode::Config, "checkpoint architecture does not match config ",
                   config_path);
      model = std::move(lc.model);
      start = lc.step;
    }

    std::ofstream csv;
    udvd::TrainHooks hooks;
    if (log_csv) {
      csv.open(log_csv, start == 0 ? std::ios::trunc : std::ios::app);
      if (!csv.good()) udvd::fail(udvd::ErrorCode::Io, "cannot write ", log_csv);
      hooks.csv = &csv;
    }

    udvd::TrainResult res = udvd::train_loop(model, opt, cfg, corpus, basis, start, hooks);
    udvd::save_checkpoint(checkpoint_out, model, &opt, res.final_step);
    if (final_step) *final_step = res.final_step;
    if (final_loss) *final_loss = res.final_loss;
    return UDVD_OK;
  });
}

int udvd_eval_dirs(const char* pred_dir, const char* gt_dir, int scale, char** json_out) {
  if (!pred_dir || !gt_dir || !json_out) return param_error("eval: null argument");
  *json_out = nullptr;
  return guarded([&] {
    if (scale < 2 || scale > 4)
      udvd::fail(udvd::ErrorCode::Param, "eval: scale must be 2, 3, or 4, got ", scale);
    std::vector<std::string> names = png_names(pred_dir);
    if (names.empty()) udvd::fail(udvd::ErrorCode::Io, "no .png images in ", pred_dir);

    nlohmann::ordered_json report;
    report["scale"] = scale;
    report["border"] = scale;
    report["items"] = nlohmann::ordered_json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const std::string& name : names) {
      fs::path gt_path = fs::path(gt_dir) / name;
      if (!fs::is_regular_file(gt_path))
        udvd::fail(udvd::ErrorCode::Io, "no ground-truth counterpart for ", name, " in ", gt_dir);
      udvd::Tensor pred = udvd::read_png((fs::path(pred_dir) / name).string());
      udvd::Tensor gt = udvd::read_png(gt_path.string());
      double p = udvd::psnr_y(pred, gt, scale);
      double s = udvd::ssim_y(pred, gt, scale);
      psnr_sum += p;
      ssim_sum += s;
      report["items"].push_back({{"name", name}, {"psnr_y", p}, {"ssim_y", s}});
    }
    report["mean_psnr_y"] = psnr_sum / static_cast<double>(names.size());
    report["mean_ssim_y"] = ssim_sum / static_cast<double>(names.size());
    *json_out = dup_string(report.dump(2) + "\n");
    return UDVD_OK;
  });
}

int udvd_bench_dynconv(int size, int k, int reps, uint64_t seed, char** csv_row, double* speedup) {
  if (!csv_row) return param_error("bench: null output");
  *csv_row = nullptr;
  return guarded([&] {
    udvd::BenchResult r = udvd::bench_dynconv(size, k, reps, seed);
    *csv_row = dup_string(r.csv_row());
    if (speedup) *speedup = r.speedup();
    return UDVD_OK;
  });
}

int udvd_grad_check(uint64_t seed, char** json_out, int* passed) {
  if (json_out) *json_out = nullptr;
  if (passed) *passed = 0;
  return guarded([&] {
    udvd::GradCheckReport rep = udvd::grad_check_all(seed);
    if (json_out) {
      nlohmann::ordered_json j;
      j["checked"] = rep.checked();
      j["failed"] = rep.failed();
      j["worst_rel"] = rep.worst_rel();
      j["ok"] = rep.ok();
      j["items"] = nlohmann::ordered_json::array();
      for (const auto& it : rep.items)
        j["items"].push_back({{"name", it.name},
                              {"checked", it.checked},
                              {"failed", it.failed},
                              {"worst_rel", it.worst_rel},
                              {"ok", it.ok()}});
      *json_out = dup_string(j.dump(2) + "\n");
    }
    if (passed) *passed = rep.ok() ? 1 : 0;
    return UDVD_OK;
  });
}

}  // extern "C"
