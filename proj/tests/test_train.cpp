#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "core/synth.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace udvd;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.model.n_res_blocks = 1;
  cfg.model.trunk_channels = 8;
  cfg.model.block_seq = "U";
  cfg.model.k = 3;
  cfg.model.scale = 2;
  cfg.batch = 2;
  cfg.patch_lr = 8;
  cfg.total_steps = 3;
  cfg.seed = 11;
  return cfg;
}

const PcaBasis& shared_basis() {
  static PcaBasis basis = pca_fit();
  return basis;
}

std::vector<Tensor> tiny_corpus() {
  return {synth_image(1, 48, 48), synth_image(2, 40, 56)};
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() {
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
  }
};

struct EnvGuard {
  std::string name, old_value;
  bool had = false;
  EnvGuard(const char* n, const char* value) : name(n) {
    if (const char* v = std::getenv(n)) {
      had = true;
      old_value = v;
    }
    setenv(n, value, 1);
  }
  ~EnvGuard() {
    if (had)
      setenv(name.c_str(), old_value.c_str(), 1);
    else
      unsetenv(name.c_str());
  }
};

}  // namespace

TEST_CASE("procedural images are deterministic and stay in range") {
  Tensor a = synth_image(5, 32, 48);
  Tensor b = synth_image(5, 32, 48);
  Tensor c = synth_image(6, 32, 48);
  REQUIRE(a.shape() == std::array<int, 4>{1, 3, 32, 48});
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
  float lo = 1.0f, hi = 0.0f;
  for (size_t i = 0; i < a.numel(); ++i) {
    lo = std::min(lo, a[i]);
    hi = std::max(hi, a[i]);
  }
  CHECK(lo >= 0.0f);
  CHECK(hi <= 1.0f);
  CHECK(hi - lo > 0.2f);  // actually has contrast
  CHECK_THROWS_AS(synth_image(1, 0, 8), Error);
}

TEST_CASE("learning rate halves on schedule") {
  TrainConfig cfg = tiny_config();
  cfg.lr0 = 1e-4;
  cfg.halve_every = 100;
  CHECK(lr_at(cfg, 0) == 1e-4);
  CHECK(lr_at(cfg, 99) == 1e-4);
  CHECK(lr_at(cfg, 100) == 5e-5);
  CHECK(lr_at(cfg, 199) == 5e-5);
  CHECK(lr_at(cfg, 200) == 2.5e-5);
  CHECK(lr_at(cfg, 450) == 6.25e-6);
  CHECK_THROWS_AS(lr_at(cfg, -1), Error);
}

TEST_CASE("the eight square symmetries compose and invert correctly") {
  // An asymmetric probe catches any wrong axis: distinct values everywhere.
  Tensor probe(1, 2, 3, 4);
  for (size_t i = 0; i < probe.numel(); ++i) probe[i] = static_cast<float>(i);

  std::vector<std::vector<float>> seen;
  for (int op = 0; op < 8; ++op) {
    Tensor t = dihedral(probe, op);
    if (op & 1) {
      CHECK(t.h() == 4);
      CHECK(t.w() == 3);
    } else {
      CHECK(t.h() == 3);
      CHECK(t.w() == 4);
    }
    Tensor back = dihedral(t, dihedral_inverse(op));
    CHECK(back.values() == probe.values());
    for (const auto& prev : seen) CHECK(t.values() != prev);
    seen.push_back(t.values());
  }
  // Transpose maps rows to columns.
  Tensor tr = dihedral(probe, 1);
  CHECK(tr.at(0, 0, 2, 1) == probe.at(0, 0, 1, 2));
  // Pure mirrors are involutions.
  for (int op : {0, 2, 4, 6}) CHECK(dihedral_inverse(op) == op);
  CHECK_THROWS_AS(dihedral(probe, 8), Error);
}

TEST_CASE("train config json round trip and strictness") {
  TrainConfig cfg = tiny_config();
  cfg.eps_range[0] = 0.5;
  cfg.eps_range[1] = 2.5;
  cfg.sigma_range[1] = 30.0;
  cfg.seed = 0xfeedface;
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.model.block_seq == "U");
  CHECK(back.model.scale == 2);
  CHECK(back.batch == cfg.batch);
  CHECK(back.lr0 == cfg.lr0);
  CHECK(back.halve_every == cfg.halve_every);
  CHECK(back.total_steps == cfg.total_steps);
  CHECK(back.patch_lr == cfg.patch_lr);
  CHECK(back.eps_range[0] == 0.5);
  CHECK(back.eps_range[1] == 2.5);
  CHECK(back.sigma_range[1] == 30.0);
  CHECK(back.seed == 0xfeedface);

  CHECK_THROWS_AS(TrainConfig::from_json("{\"batch\": 0}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"bacth\": 4}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"eps_range\": [1.0]}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"eps_range\": [2.0, 1.0]}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"model\": {\"scale\": 9}}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"sigma_range\": [0, 90]}"), Error);
}

TEST_CASE("batches are deterministic in seed and step") {
  TrainConfig cfg = tiny_config();
  auto corpus = tiny_corpus();
  Batch a = make_batch(cfg, corpus, shared_basis(), 4);
  Batch b = make_batch(cfg, corpus, shared_basis(), 4);
  CHECK(a.lr.values() == b.lr.values());
  CHECK(a.dmap.values() == b.dmap.values());
  CHECK(a.hr.values() == b.hr.values());

  Batch c = make_batch(cfg, corpus, shared_basis(), 5);
  CHECK(a.lr.values() != c.lr.values());
  TrainConfig cfg2 = cfg;
  cfg2.seed = 12;
  Batch d = make_batch(cfg2, corpus, shared_basis(), 4);
  CHECK(a.lr.values() != d.lr.values());

  REQUIRE(a.lr.shape() == std::array<int, 4>{2, 3, 8, 8});
  REQUIRE(a.dmap.shape() == std::array<int, 4>{2, 16, 8, 8});
  REQUIRE(a.hr.shape() == std::array<int, 4>{2, 3, 16, 16});
  CHECK(a.lr.all_finite());
  for (size_t i = 0; i < a.hr.numel(); ++i) {
    CHECK(a.hr[i] >= 0.0f);
    CHECK(a.hr[i] <= 1.0f);
  }
  // Each sample's map is constant per channel, and the noise channel is
  // sigma/75 within the configured range.
  for (int b_i = 0; b_i < 2; ++b_i)
    for (int ch = 0; ch < 16; ++ch) {
      float v0 = a.dmap.at(b_i, ch, 0, 0);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(a.dmap.at(b_i, ch, y, x) == v0);
      if (ch == 15) {
        CHECK(v0 >= 0.0f);
        CHECK(v0 <= 1.0f);
      }
    }
}

TEST_CASE("thread count does not change batch values") {
  TrainConfig cfg = tiny_config();
  cfg.batch = 5;
  auto corpus = tiny_corpus();
  Batch serial = [&] {
    EnvGuard env("UDVD_THREADS", "1");
    return make_batch(cfg, corpus, shared_basis(), 9);
  }();
  Batch threaded = [&] {
    EnvGuard env("UDVD_THREADS", "4");
    return make_batch(cfg, corpus, shared_basis(), 9);
  }();
  CHECK(serial.lr.values() == threaded.lr.values());
  CHECK(serial.dmap.values() == threaded.dmap.values());
  CHECK(serial.hr.values() == threaded.hr.values());
}

TEST_CASE("batch synthesis rejects bad inputs") {
  TrainConfig cfg = tiny_config();
  auto corpus = tiny_corpus();
  CHECK_THROWS_AS(make_batch(cfg, {}, shared_basis(), 0), Error);
  CHECK_THROWS_AS(make_batch(cfg, {synth_image(1, 10, 10)}, shared_basis(), 0), Error);
  CHECK_THROWS_AS(make_batch(cfg, {Tensor(1, 1, 64, 64)}, shared_basis(), 0), Error);
  CHECK_THROWS_AS(make_batch(cfg, corpus, shared_basis(), -1), Error);
  PcaBasis small = pca_fit(10);
  CHECK_THROWS_AS(make_batch(cfg, corpus, small, 0), Error);
}

TEST_CASE("training runs, logs, and can resume bit-exactly") {
  TrainConfig cfg = tiny_config();
  cfg.total_steps = 6;
  auto corpus = tiny_corpus();

  // One uninterrupted run.
  UdvdModel solo(cfg.model, cfg.seed);
  Adam opt_solo;
  std::ostringstream csv_solo;
  TrainHooks hooks_solo;
  hooks_solo.csv = &csv_solo;
  int calls = 0;
  hooks_solo.on_step = [&](int64_t step, float loss, double lr) {
    ++calls;
    CHECK(step == calls);
    CHECK(std::isfinite(loss));
    CHECK(lr == cfg.lr0);
  };
  TrainResult r = train_loop(solo, opt_solo, cfg, corpus, shared_basis(), 0, hooks_solo);
  CHECK(r.final_step == 6);
  CHECK(calls == 6);
  std::string log = csv_solo.str();
  CHECK(log.rfind("step,loss,lr\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 7);  // header + 6 rows

  // The same run split across a checkpoint.
  UdvdModel part(cfg.model, cfg.seed);
  Adam opt_part;
  TrainConfig first_half = cfg;
  first_half.total_steps = 3;
  train_loop(part, opt_part, first_half, corpus, shared_basis(), 0);
  TempFile f("tmp_train_resume.bin");
  save_checkpoint(f.path, part, &opt_part, 3);

  Adam opt_resumed;
  LoadedCheckpoint lc = load_checkpoint(f.path, &opt_resumed);
  REQUIRE(lc.step == 3);
  std::ostringstream csv_resume;
  TrainHooks hooks_resume;
  hooks_resume.csv = &csv_resume;
  train_loop(lc.model, opt_resumed, cfg, corpus, shared_basis(), lc.step, hooks_resume);
  std::string resume_log = csv_resume.str();
  CHECK(resume_log.rfind("step,", 0) != 0);  // no duplicate header on resume
  CHECK(std::count(resume_log.begin(), resume_log.end(), '\n') == 3);

  REQUIRE(lc.model.params().size() == solo.params().size());
  for (size_t i = 0; i < solo.params().size(); ++i) {
    CAPTURE(solo.params()[i].name);
    CHECK(solo.params()[i].value.values() == lc.model.params()[i].value.values());
  }

  CHECK_THROWS_AS(train_loop(solo, opt_solo, cfg, corpus, shared_basis(), 7), Error);
}

TEST_CASE("a short run on a fixed degradation learns") {
  TrainConfig cfg = tiny_config();
  cfg.model.trunk_channels = 12;
  cfg.patch_lr = 10;
  cfg.batch = 3;
  cfg.total_steps = 40;
  cfg.lr0 = 1e-3;
  cfg.eps_range[0] = cfg.eps_range[1] = 1.0;
  cfg.sigma_range[0] = cfg.sigma_range[1] = 0.0;
  auto corpus = tiny_corpus();

  UdvdModel model(cfg.model, 3);
  Adam opt;
  double head = 0.0, tail = 0.0;
  int64_t n_head = 5, from_tail = cfg.total_steps - 5;
  TrainHooks hooks;
  hooks.on_step = [&](int64_t step, float loss, double) {
    if (step <= n_head) head += loss;
    if (step > from_tail) tail += loss;
  };
  train_loop(model, opt, cfg, corpus, shared_basis(), 0, hooks);
  CHECK(tail / 5.0 < 0.6 * (head / 5.0));
}

TEST_CASE("evaluation scores a corpus against the bicubic baseline") {
  TrainConfig cfg = tiny_config();
  UdvdModel model(cfg.model, 1);
  std::vector<Tensor> corpus = {synth_image(21, 36, 36), synth_image(22, 35, 33)};
  DegradationParams p;
  p.eps = 0.9;
  p.sigma = 5.0;
  p.scale = 2;
  EvalResult r = evaluate(model, corpus, shared_basis(), p, 2);
  REQUIRE(r.items.size() == 2);
  for (const EvalItem& it : r.items) {
    CHECK(std::isfinite(it.psnr));
    CHECK(it.ssim > -1.0);
    CHECK(it.ssim <= 1.0);
    CHECK(it.psnr_bicubic > 15.0);  // mild degradation: bicubic stays decent
    CHECK(it.ssim_bicubic > 0.5);
  }
  CHECK(r.psnr == doctest::Approx((r.items[0].psnr + r.items[1].psnr) / 2));

  EvalResult again = evaluate(model, corpus, shared_basis(), p, 2);
  CHECK(r.psnr == again.psnr);
  CHECK(r.ssim == again.ssim);

  CHECK_THROWS_AS(evaluate(model, {}, shared_basis(), p, 2), Error);
  CHECK_THROWS_AS(evaluate(model, {Tensor(1, 3, 1, 1)}, shared_basis(), p, 0), Error);
}
