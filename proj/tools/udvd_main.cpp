// Command-line front end for the UDVD toolkit. Links only the public C API;
// all heavy lifting lives behind libudvd.
//
// Exit codes: 0 success, 1 runtime failure (one "error: ..." line on
// standard error), 2 usage error.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>

#include "CLI11.hpp"
#include "udvd/udvd.h"

namespace {

int run_or_report(int status) {
  if (status == UDVD_OK) return 0;
  std::fprintf(stderr, "error: %s\n", udvd_last_error());
  return 1;
}

// Prints and releases a string the library allocated, if any.
void emit(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  udvd_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UDVD super-resolution toolkit: degradation synthesis, PCA basis fitting, "
               "training, inference, evaluation, kernel visualization, benchmarking, and "
               "gradient checking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", udvd_version());
  std::function<int()> action;

  struct {
    std::string in, out;
    double eps = 1.3, sigma = 15.0;
    int scale = 3;
    uint64_t seed = 0;
  } dg;
  {
    auto* c = app.add_subcommand("degrade",
                                 "Blur, bicubic-downscale, and noise a high-resolution PNG");
    c->add_option("--in", dg.in, "High-resolution input PNG")->required();
    c->add_option("--out", dg.out, "Low-resolution output PNG")->required();
    c->add_option("--eps", dg.eps, "Gaussian blur width")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--sigma", dg.sigma, "Noise level in 8-bit units")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->add_option("--scale", dg.scale, "Downscale factor")
        ->check(CLI::IsMember({2, 3, 4}))
        ->capture_default_str();
    c->add_option("--seed", dg.seed, "Noise stream seed")->capture_default_str();
    c->callback([&] {
      action = [&] {
        return run_or_report(
            udvd_degrade_file(dg.in.c_str(), dg.out.c_str(), dg.eps, dg.sigma, dg.scale, dg.seed));
      };
    });
  }

  struct {
    std::string in, out;
    double eps_lo = 0.2, eps_hi = 2.0, sigma_lo = 5.0, sigma_hi = 50.0;
    int scale = 3;
    uint64_t seed = 0;
  } ds;
  {
    auto* c = app.add_subcommand(
        "degrade-spatial", "Degrade with blur/noise ramping linearly from left to right");
    c->add_option("--in", ds.in, "High-resolution input PNG")->required();
    c->add_option("--out", ds.out, "Low-resolution output PNG")->required();
    c->add_option("--eps-lo", ds.eps_lo, "Blur width at the left edge")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--eps-hi", ds.eps_hi, "Blur width at the right edge")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--sigma-lo", ds.sigma_lo, "Noise level at the left edge")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->add_option("--sigma-hi", ds.sigma_hi, "Noise level at the right edge")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->add_option("--scale", ds.scale, "Downscale factor")
        ->check(CLI::IsMember({2, 3, 4}))
        ->capture_default_str();
    c->add_option("--seed", ds.seed, "Noise stream seed")->capture_default_str();
    c->callback([&] {
      action = [&] {
        return run_or_report(udvd_degrade_spatial_file(ds.in.c_str(), ds.out.c_str(), ds.eps_lo,
                                                       ds.eps_hi, ds.sigma_lo, ds.sigma_hi,
                                                       ds.scale, ds.seed));
      };
    });
  }

  struct {
    std::string out;
    int components = 15, samples = 1000, kernel_size = 15;
  } pf;
  {
    auto* c = app.add_subcommand("pca-fit",
                                 "Fit and save the blur-kernel PCA basis for degradation maps");
    c->add_option("--out", pf.out, "Output basis file")->required();
    c->add_option("--components", pf.components, "Principal components kept")
        ->check(CLI::Range(1, 225))
        ->capture_default_str();
    c->add_option("--samples", pf.samples, "Blur widths sampled across the legal range")
        ->check(CLI::Range(2, 100000))
        ->capture_default_str();
    c->add_option("--kernel-size", pf.kernel_size, "Blur kernel size (odd)")
        ->check(CLI::IsMember({3, 5, 7, 9, 11, 13, 15}))
        ->capture_default_str();
    c->callback([&] {
      action = [&] {
        return run_or_report(
            udvd_pca_fit_file(pf.out.c_str(), pf.components, pf.samples, pf.kernel_size));
      };
    });
  }

  struct {
    std::string config, data, out, log, basis, resume;
  } tr;
  {
    auto* c = app.add_subcommand("train", "Train a model on a directory of PNG images");
    c->add_option("--config", tr.config, "Training configuration JSON")->required();
    c->add_option("--data", tr.data, "Directory of high-resolution .png images")->required();
    c->add_option("--out", tr.out, "Checkpoint to write")->required();
    c->add_option("--log", tr.log, "CSV training log (step,loss,lr)");
    c->add_option("--basis", tr.basis, "Degradation-map basis file (default: fit in-process)");
    c->add_option("--resume", tr.resume, "Checkpoint to continue from");
    c->callback([&] {
      action = [&] {
        int64_t step = 0;
        double loss = 0.0;
        int status = udvd_train_run(tr.config.c_str(), tr.data.c_str(),
                                    tr.basis.empty() ? nullptr : tr.basis.c_str(),
                                    tr.resume.empty() ? nullptr : tr.resume.c_str(),
                                    tr.out.c_str(), tr.log.empty() ? nullptr : tr.log.c_str(),
                                    &step, &loss);
        if (status == UDVD_OK)
          std::printf("step=%lld loss=%.6g\n", static_cast<long long>(step), loss);
        return run_or_report(status);
      };
    });
  }

  struct {
    std::string model, in, out, basis;
    double eps = 1.3, sigma = 15.0;
  } inf;
  {
    auto* c = app.add_subcommand("infer", "Super-resolve a PNG under a stated degradation");
    c->add_option("--model", inf.model, "Checkpoint to load")->required();
    c->add_option("--in", inf.in, "Low-resolution input PNG")->required();
    c->add_option("--out", inf.out, "Super-resolved output PNG")->required();
    c->add_option("--basis", inf.basis, "Degradation-map basis file")->required();
    c->add_option("--eps", inf.eps, "Assumed blur width")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--sigma", inf.sigma, "Assumed noise level")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->callback([&] {
      action = [&] {
        udvd_model* model = nullptr;
        int status = udvd_model_load(inf.model.c_str(), &model);
        if (status == UDVD_OK)
          status = udvd_model_infer_file(model, inf.in.c_str(), inf.basis.c_str(), inf.eps,
                                         inf.sigma, inf.out.c_str());
        udvd_model_free(model);
        return run_or_report(status);
      };
    });
  }

  struct {
    std::string pred, gt;
    int scale = 3;
  } ev;
  {
    auto* c = app.add_subcommand(
        "eval", "Score predictions against ground truth (PSNR/SSIM on Y, JSON report)");
    c->add_option("--pred", ev.pred, "Directory of predicted .png images")->required();
    c->add_option("--gt", ev.gt, "Directory of ground-truth .png images")->required();
    c->add_option("--scale", ev.scale, "Upscaling factor; also the border crop in pixels")
        ->check(CLI::IsMember({2, 3, 4}))
        ->capture_default_str();
    c->callback([&] {
      action = [&] {
        char* json = nullptr;
        int status = udvd_eval_dirs(ev.pred.c_str(), ev.gt.c_str(), ev.scale, &json);
        emit(json);
        return run_or_report(status);
      };
    });
  }

  struct {
    std::string model, in, out, basis;
    double eps_a = 0.2, sigma_a = 0.0, eps_b = 1.6, sigma_b = 10.0;
    int block = 0;
  } vz;
  {
    auto* c = app.add_subcommand(
        "viz-kernels",
        "Render predicted per-pixel kernels under two degradations plus their difference");
    c->add_option("--model", vz.model, "Checkpoint to load")->required();
    c->add_option("--in", vz.in, "Low-resolution input PNG")->required();
    c->add_option("--out", vz.out, "Output grayscale PNG")->required();
    c->add_option("--basis", vz.basis, "Degradation-map basis file")->required();
    c->add_option("--eps-a", vz.eps_a, "Blur width for the first panel")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--sigma-a", vz.sigma_a, "Noise level for the first panel")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->add_option("--eps-b", vz.eps_b, "Blur width for the second panel")
        ->check(CLI::Range(0.2, 3.0))
        ->capture_default_str();
    c->add_option("--sigma-b", vz.sigma_b, "Noise level for the second panel")
        ->check(CLI::Range(0.0, 75.0))
        ->capture_default_str();
    c->add_option("--block", vz.block, "Dynamic block to visualize")
        ->check(CLI::Range(0, 15))
        ->capture_default_str();
    c->callback([&] {
      action = [&] {
        udvd_model* model = nullptr;
        int status = udvd_model_load(vz.model.c_str(), &model);
        if (status == UDVD_OK)
          status = udvd_model_viz_file(model, vz.in.c_str(), vz.basis.c_str(), vz.eps_a,
                                       vz.sigma_a, vz.eps_b, vz.sigma_b, vz.block,
                                       vz.out.c_str());
        udvd_model_free(model);
        return run_or_report(status);
      };
    });
  }

  struct {
    std::string op = "dynconv";
    int size = 256, k = 5, reps = 3;
    uint64_t seed = 1;
  } bn;
  {
    auto* c = app.add_subcommand("bench",
                                 "Time the reference vs optimized per-pixel convolution");
    c->add_option("--op", bn.op, "Operator to benchmark")
        ->check(CLI::IsMember({"dynconv"}))
        ->capture_default_str();
    c->add_option("--size", bn.size, "Square input edge length")
        ->check(CLI::Range(16, 4096))
        ->capture_default_str();
    c->add_option("--k", bn.k, "Per-pixel kernel size (odd)")
        ->check(CLI::IsMember({1, 3, 5, 7, 9, 11, 13, 15}))
        ->capture_default_str();
    c->add_option("--reps", bn.reps, "Timed repetitions (fastest kept)")
        ->check(CLI::Range(1, 100))
        ->capture_default_str();
    c->add_option("--seed", bn.seed, "Input data seed")->capture_default_str();
    c->callback([&] {
      action = [&] {
        char* row = nullptr;
        int status = udvd_bench_dynconv(bn.size, bn.k, bn.reps, bn.seed, &row, nullptr);
        if (status == UDVD_OK) std::printf("op,size,k,ref_ms,opt_ms,speedup\n");
        emit(row);
        if (status == UDVD_OK) std::printf("\n");
        return run_or_report(status);
      };
    });
  }

  struct {
    uint64_t seed = 7;
  } gc;
  {
    auto* c = app.add_subcommand(
        "grad-check", "Validate analytic gradients against finite differences; exit 0 iff passed");
    c->add_option("--seed", gc.seed, "Probe seed")->capture_default_str();
    c->callback([&] {
      action = [&] {
        char* json = nullptr;
        int passed = 0;
        int status = udvd_grad_check(gc.seed, &json, &passed);
        emit(json);
        if (status != UDVD_OK) return run_or_report(status);
        if (!passed) {
          std::fprintf(stderr, "error: gradient check failed\n");
          return 1;
        }
        return 0;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message, naming the offending flag
    return 2;
  }
  return action ? action() : 2;
}
