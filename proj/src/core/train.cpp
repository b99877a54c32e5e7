#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"

namespace udvd {
namespace {

constexpr uint64_t kTrainTag = 0x74726169ull;  // "trai"
constexpr uint64_t kEvalTag = 0x6576616cull;   // "eval"

Tensor crop(const Tensor& src, int y0, int x0, int h, int w) {
  Tensor out(src.n(), src.c(), h, w);
  for (int n = 0; n < src.n(); ++n)
    for (int c = 0; c < src.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(n, c, y, x) = src.at(n, c, y0 + y, x0 + x);
  return out;
}

int thread_budget(int jobs) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (const char* env = std::getenv("UDVD_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1 && v <= 256) workers = static_cast<int>(v);
  }
  return std::max(1, std::min(workers, jobs));
}

// Runs fn(job) for job in [0, jobs) across the worker budget; the first
// exception wins and is rethrown on the caller.
void parallel_for(int jobs, const std::function<void(int)>& fn) {
  int workers = thread_budget(jobs);
  if (workers <= 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&, t]() {
      for (int j = t; j < jobs; j += workers) {
        try {
          fn(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (batch < 1 || batch > 1024)
    fail(ErrorCode::Config, "train: batch must be in [1, 1024], got ", batch);
  if (!(lr0 > 0.0) || lr0 > 1.0)
    fail(ErrorCode::Config, "train: lr0 must be in (0, 1], got ", lr0);
  if (halve_every < 1) fail(ErrorCode::Config, "train: halve_every must be positive");
  if (total_steps < 1) fail(ErrorCode::Config, "train: total_steps must be positive");
  if (patch_lr < 8 || patch_lr > 256)
    fail(ErrorCode::Config, "train: patch_lr must be in [8, 256], got ", patch_lr);
  if (eps_range[0] > eps_range[1] || eps_range[0] < 0.2 || eps_range[1] > 3.0)
    fail(ErrorCode::Config, "train: eps_range must be ordered within [0.2, 3.0]");
  if (sigma_range[0] > sigma_range[1] || sigma_range[0] < 0.0 || sigma_range[1] > 75.0)
    fail(ErrorCode::Config, "train: sigma_range must be ordered within [0, 75]");
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::Config, "train config: ", e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Config, "train config: expected a JSON object");
  static const std::set<std::string> known = {"model",       "batch",     "lr0",
                                             "halve_every", "total_steps", "patch_lr",
                                             "eps_range",   "sigma_range", "seed"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail(ErrorCode::Config, "train config: unknown field '", item.key(), "'");
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = UdvdConfig::from_json(j.at("model").dump());
    if (j.contains("batch")) c.batch = j.at("batch").get<int>();
    if (j.contains("lr0")) c.lr0 = j.at("lr0").get<double>();
    if (j.contains("halve_every")) c.halve_every = j.at("halve_every").get<int64_t>();
    if (j.contains("total_steps")) c.total_steps = j.at("total_steps").get<int64_t>();
    if (j.contains("patch_lr")) c.patch_lr = j.at("patch_lr").get<int>();
    auto range = [&](const char* name, double* dst) {
      if (!j.contains(name)) return;
      const auto& a = j.at(name);
      if (!a.is_array() || a.size() != 2)
        fail(ErrorCode::Config, "train config: ", name, " must be [lo, hi]");
      dst[0] = a[0].get<double>();
      dst[1] = a[1].get<double>();
    };
    range("eps_range", c.eps_range);
    range("sigma_range", c.sigma_range);
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::Config, "train config: ", e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = nlohmann::ordered_json::parse(model.to_json());
  j["batch"] = batch;
  j["lr0"] = lr0;
  j["halve_every"] = halve_every;
  j["total_steps"] = total_steps;
  j["patch_lr"] = patch_lr;
  j["eps_range"] = {eps_range[0], eps_range[1]};
  j["sigma_range"] = {sigma_range[0], sigma_range[1]};
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

double lr_at(const TrainConfig& cfg, int64_t step) {
  if (step < 0) fail_param("lr_at: step must be non-negative, got ", step);
  return cfg.lr0 * std::pow(0.5, static_cast<double>(step / cfg.halve_every));
}

Tensor dihedral(const Tensor& img, int op) {
  if (op < 0 || op > 7) fail_param("dihedral: op must be in [0, 7], got ", op);
  bool tr = op & 1, hflip = op & 2, vflip = op & 4;
  int oh = tr ? img.w() : img.h();
  int ow = tr ? img.h() : img.w();
  Tensor out(img.n(), img.c(), oh, ow);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          int yy = vflip ? oh - 1 - y : y;
          int xx = hflip ? ow - 1 - x : x;
          out.at(n, c, y, x) = tr ? img.at(n, c, xx, yy) : img.at(n, c, yy, xx);
        }
  return out;
}

int dihedral_inverse(int op) {
  if (op < 0 || op > 7) fail_param("dihedral_inverse: op must be in [0, 7], got ", op);
  // Flip-only ops are involutions; with a transpose the two mirror axes
  // swap roles (transposing maps rows to columns).
  if (!(op & 1)) return op;
  return 1 | ((op & 2) ? 4 : 0) | ((op & 4) ? 2 : 0);
}

Batch make_batch(const TrainConfig& cfg, const std::vector<Tensor>& corpus,
                 const PcaBasis& basis, int64_t step) {
  cfg.validate();
  if (step < 0) fail_param("make_batch: step must be non-negative, got ", step);
  if (corpus.empty()) fail_param("make_batch: corpus is empty");
  if (basis.n_components() + 1 != kMapChannels)
    fail_param("make_batch: basis encodes ", basis.n_components() + 1,
               " map channels, the network wants ", kMapChannels);
  int s = cfg.model.scale, p = cfg.patch_lr, ph = p * s;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Tensor& t = corpus[i];
    if (t.n() != 1 || t.c() != 3)
      fail_shape("make_batch: corpus image ", i, " must be (1,3,h,w), got ", shape_str(t));
    if (t.h() < ph || t.w() < ph)
      fail_shape("make_batch: corpus image ", i, " is ", t.h(), "x", t.w(),
                 ", smaller than the ", ph, "x", ph, " high-res patch");
  }

  Batch out{Tensor(cfg.batch, 3, p, p), Tensor(cfg.batch, kMapChannels, p, p),
            Tensor(cfg.batch, 3, ph, ph)};
  CounterRng rng(rng_key({kTrainTag, cfg.seed, static_cast<uint64_t>(step)}));
  parallel_for(cfg.batch, [&](int b) {
    uint64_t base = static_cast<uint64_t>(b) << 4;  // 16 counters per sample
    size_t si = std::min(corpus.size() - 1,
                         static_cast<size_t>(rng.uniform(base + 0) * corpus.size()));
    const Tensor& src = corpus[si];
    int y0 = std::min(src.h() - ph, static_cast<int>(rng.uniform(base + 1) * (src.h() - ph + 1)));
    int x0 = std::min(src.w() - ph, static_cast<int>(rng.uniform(base + 2) * (src.w() - ph + 1)));
    int aug = static_cast<int>(rng.uniform(base + 3) * 8.0) & 7;
    double eps = rng.uniform(base + 4, cfg.eps_range[0], cfg.eps_range[1]);
    double sigma = rng.uniform(base + 5, cfg.sigma_range[0], cfg.sigma_range[1]);
    uint64_t noise_seed = rng.bits(base + 6);

    Tensor hr = dihedral(crop(src, y0, x0, ph, ph), aug);
    Tensor lr = degrade(hr, DegradationParams{eps, sigma, s, noise_seed});
    Tensor dmap = encode_degradation(basis, eps, sigma, p, p);

    std::copy(hr.data(), hr.data() + hr.numel(), out.hr.data() + out.hr.offset(b, 0, 0, 0));
    std::copy(lr.data(), lr.data() + lr.numel(), out.lr.data() + out.lr.offset(b, 0, 0, 0));
    std::copy(dmap.data(), dmap.data() + dmap.numel(),
              out.dmap.data() + out.dmap.offset(b, 0, 0, 0));
  });
  return out;
}

TrainResult train_loop(UdvdModel& model, Adam& opt, const TrainConfig& cfg,
                       const std::vector<Tensor>& corpus, const PcaBasis& basis,
                       int64_t start_step, const TrainHooks& hooks) {
  cfg.validate();
  if (start_step < 0 || start_step > cfg.total_steps)
    fail_param("train_loop: start step ", start_step, " outside [0, ", cfg.total_steps, "]");
  if (hooks.csv && start_step == 0) *hooks.csv << "step,loss,lr\n";

  TrainResult result{start_step, 0.0f};
  for (int64_t step = start_step; step < cfg.total_steps; ++step) {
    Batch batch = make_batch(cfg, corpus, basis, step);
    auto sr = model.forward_backward(batch.lr, batch.dmap, batch.hr);
    if (!std::isfinite(sr.loss))
      fail(ErrorCode::Numeric, "training diverged: non-finite loss at step ", step, " (seed ",
           cfg.seed, ", batch ", cfg.batch, "); rerun this step to reproduce");
    double lr = lr_at(cfg, step);
    opt.step(model.params(), static_cast<float>(lr));
    result.final_step = step + 1;
    result.final_loss = sr.loss;
    if (hooks.csv)
      *hooks.csv << step + 1 << ',' << std::setprecision(9) << sr.loss << ','
                 << std::setprecision(9) << lr << '\n';
    if (hooks.on_step) hooks.on_step(step + 1, sr.loss, lr);
  }
  if (hooks.csv) hooks.csv->flush();
  return result;
}

EvalResult evaluate(const UdvdModel& model, const std::vector<Tensor>& corpus,
                    const PcaBasis& basis, const DegradationParams& p, int border) {
  validate(p);
  if (corpus.empty()) fail_param("evaluate: corpus is empty");
  if (basis.n_components() + 1 != kMapChannels)
    fail_param("evaluate: basis encodes ", basis.n_components() + 1,
               " map channels, the network wants ", kMapChannels);
  int s = p.scale;
  EvalResult out;
  out.items.resize(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), [&](int i) {
    const Tensor& src = corpus[i];
    if (src.n() != 1 || src.c() != 3)
      fail_shape("evaluate: image ", i, " must be (1,3,h,w), got ", shape_str(src));
    int h = (src.h() / s) * s, w = (src.w() / s) * s;
    if (h < s || w < s)
      fail_shape("evaluate: image ", i, " is too small to downscale by ", s);
    Tensor hr = (h == src.h() && w == src.w()) ? src : crop(src, 0, 0, h, w);
    DegradationParams pi = p;
    pi.seed = rng_key({kEvalTag, p.seed, static_cast<uint64_t>(i)});
    Tensor lr = degrade(hr, pi);
    Tensor dmap = encode_degradation(basis, p.eps, p.sigma, lr.h(), lr.w());
    Tensor sr = model.infer(lr, dmap);
    Tensor bic = bicubic_resize(lr, h, w, true);
    EvalItem& item = out.items[i];
    item.psnr = psnr_y(sr, hr, border);
    item.ssim = ssim_y(sr, hr, border);
    item.psnr_bicubic = psnr_y(bic, hr, border);
    item.ssim_bicubic = ssim_y(bic, hr, border);
  });
  for (const EvalItem& it : out.items) {
    out.psnr += it.psnr;
    out.ssim += it.ssim;
    out.psnr_bicubic += it.psnr_bicubic;
    out.ssim_bicubic += it.ssim_bicubic;
  }
  double n = static_cast<double>(out.items.size());
  out.psnr /= n;
  out.ssim /= n;
  out.psnr_bicubic /= n;
  out.ssim_bicubic /= n;
  return out;
}

}  // namespace udvd
