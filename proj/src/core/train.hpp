#pragma once
// Training pipeline: deterministic on-the-fly batch synthesis (crop,
// augment, degrade, encode the degradation map), the Adam loop with a
// halving learning-rate schedule, and corpus evaluation against a bicubic
// baseline.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "core/degrade.hpp"
#include "core/model.hpp"
#include "core/pca.hpp"

namespace udvd {

struct TrainConfig {
  UdvdConfig model;
  int batch = 32;
  double lr0 = 1e-4;
  int64_t halve_every = 200000;
  int64_t total_steps = 1000;
  int patch_lr = 48;  // low-res patch side; high-res crops are patch_lr*scale
  double eps_range[2] = {0.2, 3.0};
  double sigma_range[2] = {0.0, 75.0};
  uint64_t seed = 0;

  void validate() const;
  static TrainConfig from_json(const std::string& text);
  std::string to_json() const;
};

// Learning rate for a 0-based step: lr0 halved once per halve_every steps.
double lr_at(const TrainConfig& cfg, int64_t step);

// The 8 symmetries of a square image; op 0 is the identity. Bit 0
// transposes, bit 1 then mirrors columns, bit 2 mirrors rows.
Tensor dihedral(const Tensor& img, int op);
int dihedral_inverse(int op);

struct Batch {
  Tensor lr, dmap, hr;
};
// Training batch for one step, deterministic in (cfg.seed, step): each
// sample draws a corpus image, crop position, symmetry, blur width and
// noise level from its own counter block. Synthesis fans out over threads
// (capped by the UDVD_THREADS environment variable) into disjoint batch
// slots, so the thread count never changes the values.
Batch make_batch(const TrainConfig& cfg, const std::vector<Tensor>& corpus,
                 const PcaBasis& basis, int64_t step);

struct TrainHooks {
  std::ostream* csv = nullptr;  // receives "step,loss,lr" rows
  std::function<void(int64_t step, float loss, double lr)> on_step;
};
struct TrainResult {
  int64_t final_step = 0;
  float final_loss = 0.0f;
};
// Runs steps [start_step, cfg.total_steps). A non-finite loss aborts with
// a diagnostic naming the step and seed so the batch can be replayed.
TrainResult train_loop(UdvdModel& model, Adam& opt, const TrainConfig& cfg,
                       const std::vector<Tensor>& corpus, const PcaBasis& basis,
                       int64_t start_step, const TrainHooks& hooks = {});

struct EvalItem {
  double psnr = 0, ssim = 0, psnr_bicubic = 0, ssim_bicubic = 0;
};
struct EvalResult {
  double psnr = 0, ssim = 0, psnr_bicubic = 0, ssim_bicubic = 0;  // means
  std::vector<EvalItem> items;
};
// Degrades every corpus image with the given parameters (noise stream
// re-seeded per image), restores it with the model, and scores luma
// PSNR/SSIM against the original next to a plain bicubic upscale. Images
// are cropped to scale multiples; `border` high-res pixels are ignored at
// each edge.
EvalResult evaluate(const UdvdModel& model, const std::vector<Tensor>& corpus,
                    const PcaBasis& basis, const DegradationParams& p, int border);

}  // namespace udvd
