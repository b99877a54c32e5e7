#pragma once
// The super-resolution network. A shared convolutional trunk reads the
// low-resolution image together with its degradation map; a sequence of
// dynamic blocks then predicts per-pixel filter kernels plus a residual
// image at each stage, upsampling along the way until the target scale is
// reached. Every stage emits an image estimate, and training can penalize
// all of them (multistage) or just the last.
//
// Block sequence grammar: one letter per dynamic block, 'U' for a block
// that upsamples and 'D' for one that refines at the current resolution.
// The prime factors of the scale are dealt round-robin onto the 'U'
// blocks, so e.g. scale 4 with "UDU" runs x2, x1, x2. An empty sequence
// degenerates to a plain upscaler: trunk, one projection conv, and a
// sub-pixel shuffle.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/param.hpp"
#include "core/tensor.hpp"

namespace udvd {

// Degradation-map channels consumed by the network: blur coefficients
// plus one noise-level channel.
inline constexpr int kMapChannels = 16;

struct UdvdConfig {
  int n_res_blocks = 6;
  int trunk_channels = 64;
  std::string block_seq = "UDD";
  int k = 5;  // dynamic kernel size, odd
  int scale = 3;
  bool multistage = true;

  void validate() const;
  // Per-block upsampling rate; multiplies out to `scale`.
  std::vector<int> block_rates() const;
  // Cumulative output rate after each stage (one entry per stage; the
  // empty sequence still has one stage at the full scale).
  std::vector<int> stage_rates() const;

  static UdvdConfig from_json(const std::string& text);
  std::string to_json() const;
};

class UdvdModel {
 public:
  // Fresh network; weights draw from a stream keyed by (seed, layer name),
  // scaled by sqrt(2 / fan_in). Biases start at zero.
  UdvdModel(const UdvdConfig& cfg, uint64_t seed);

  const UdvdConfig& config() const { return cfg_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  Parameter* find_param(const std::string& name);
  size_t weight_count() const;  // total scalar parameters

  // lr is (n,3,h,w); dmap is (n,kMapChannels,h,w). Returns one image per
  // stage, the last at (n,3,h*scale,w*scale).
  std::vector<Tensor> forward_stages(const Tensor& lr, const Tensor& dmap) const;
  Tensor infer(const Tensor& lr, const Tensor& dmap) const;
  // Per-pixel filters each dynamic block predicts for this input, one
  // (n, k^2*r^2, h, w) tensor per block. Empty for the plain upscaler.
  std::vector<Tensor> predict_kernels(const Tensor& lr, const Tensor& dmap) const;

  struct StepResult {
    float loss = 0.0f;                // optimized objective
    std::vector<float> stage_losses;  // per penalized stage, in order
  };
  // Records the forward pass on a tape, scores each penalized stage
  // against the (downscaled) ground truth, and backpropagates; gradients
  // land in params()[i].grad.
  StepResult forward_backward(const Tensor& lr, const Tensor& dmap, const Tensor& hr);

  // The same objective recomputed in double precision from explicit parameter
  // values (ordered as params()). Stage targets stay the float tensors the
  // tape uses, promoted to double, so both paths score the identical
  // objective. Serves finite-difference gradient checks, where a 64-bit
  // re-evaluation keeps cancellation error far below the comparison
  // tolerance.
  double loss_fp64(const Tensor& lr, const Tensor& dmap, const Tensor& hr,
                   const std::vector<TensorD>& values) const;

 private:
  struct ConvRef {
    int w = -1;
    int b = -1;
  };
  struct DynRefs {
    ConvRef head1, head2, head3, kpred, res1, res2;
    int rate = 1;
  };

  int add_param(const std::string& name, int c_out, int c_in, int kh, int kw, uint64_t seed,
                double wscale = 1.0);
  ConvRef add_conv(const std::string& prefix, int c_out, int c_in, uint64_t seed,
                   double wscale = 1.0);
  void check_inputs(const Tensor& lr, const Tensor& dmap) const;

  template <class Engine>
  std::vector<typename Engine::Value> run(Engine& e, typename Engine::Value lr,
                                          typename Engine::Value dmap,
                                          std::vector<typename Engine::Value>* kerns = nullptr) const;

  UdvdConfig cfg_;
  std::vector<Parameter> params_;
  ConvRef input_;
  std::vector<std::pair<ConvRef, ConvRef>> trunk_;
  std::map<int, ConvRef> align_;  // keyed by the rate the features feed
  std::vector<DynRefs> dyn_;
  ConvRef head_;  // plain-upscaler projection (empty block_seq only)
};

// Checkpoints: a tensor container at `path` (weights by name, optimizer
// moments under "opt.", the step counter under "train.step") plus a JSON
// config sidecar at `path` + ".json".
void save_checkpoint(const std::string& path, const UdvdModel& model, const Adam* opt = nullptr,
                     int64_t step = 0);

struct LoadedCheckpoint {
  UdvdModel model;
  int64_t step = 0;
  bool has_optimizer = false;
};
// Rebuilds the model from the sidecar config and stored weights; if `opt`
// is given and moments were saved, restores them too.
LoadedCheckpoint load_checkpoint(const std::string& path, Adam* opt = nullptr);

}  // namespace udvd
