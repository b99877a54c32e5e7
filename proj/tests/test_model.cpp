#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "core/degrade.hpp"
#include "core/model.hpp"
#include "core/nn_ops.hpp"
#include "test_util.hpp"

using namespace udvd;
using testutil::fill;

// Golden values from tests/golden/gen_model.py: an independent float64
// torch mirror of the same architecture with identical weight streams.

namespace {

UdvdConfig mirror_config() {
  UdvdConfig cfg;
  cfg.n_res_blocks = 1;
  cfg.trunk_channels = 8;
  cfg.block_seq = "UDU";
  cfg.k = 3;
  cfg.scale = 4;
  cfg.multistage = true;
  return cfg;
}

double dsum(const Tensor& t) {
  double s = 0.0;
  for (size_t i = 0; i < t.numel(); ++i) s += t[i];
  return s;
}

double dabs_sum(const Tensor& t) {
  double s = 0.0;
  for (size_t i = 0; i < t.numel(); ++i) s += std::fabs(t[i]);
  return s;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() {
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
  }
};

}  // namespace

TEST_CASE("block rates deal the scale's prime factors onto the U blocks") {
  auto rates = [](const char* seq, int scale) {
    UdvdConfig c = mirror_config();
    c.block_seq = seq;
    c.scale = scale;
    return c.block_rates();
  };
  CHECK(rates("UDU", 4) == std::vector<int>{2, 1, 2});
  CHECK(rates("U", 4) == std::vector<int>{4});
  CHECK(rates("UU", 4) == std::vector<int>{2, 2});
  CHECK(rates("UDD", 2) == std::vector<int>{2, 1, 1});
  CHECK(rates("DU", 3) == std::vector<int>{1, 3});

  UdvdConfig base = mirror_config();
  base.block_seq = "";
  base.scale = 3;
  CHECK(base.stage_rates() == std::vector<int>{3});
  UdvdConfig udu = mirror_config();
  CHECK(udu.stage_rates() == std::vector<int>{2, 2, 4});
}

TEST_CASE("config validation rejects malformed setups") {
  auto bad = [](auto&& tweak) {
    UdvdConfig c = mirror_config();
    tweak(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  bad([](UdvdConfig& c) { c.k = 4; });
  bad([](UdvdConfig& c) { c.k = 17; });
  bad([](UdvdConfig& c) { c.scale = 5; });
  bad([](UdvdConfig& c) { c.scale = 1; });
  bad([](UdvdConfig& c) { c.block_seq = "UXD"; });
  bad([](UdvdConfig& c) { c.block_seq = "DDD"; });        // nothing upsamples
  bad([](UdvdConfig& c) { c.block_seq = "UUU"; });        // more U than factors of 4
  bad([](UdvdConfig& c) { c.scale = 3; });                // "UDU" has 2 U, 3 has 1 factor
  bad([](UdvdConfig& c) { c.n_res_blocks = -1; });
  bad([](UdvdConfig& c) { c.trunk_channels = 0; });
}

TEST_CASE("config json round trip and strictness") {
  UdvdConfig c = mirror_config();
  UdvdConfig back = UdvdConfig::from_json(c.to_json());
  CHECK(back.n_res_blocks == c.n_res_blocks);
  CHECK(back.trunk_channels == c.trunk_channels);
  CHECK(back.block_seq == c.block_seq);
  CHECK(back.k == c.k);
  CHECK(back.scale == c.scale);
  CHECK(back.multistage == c.multistage);

  CHECK_THROWS_AS(UdvdConfig::from_json("{"), Error);
  CHECK_THROWS_AS(UdvdConfig::from_json("[1,2]"), Error);
  CHECK_THROWS_AS(UdvdConfig::from_json("{\"scal\": 3}"), Error);
  CHECK_THROWS_AS(UdvdConfig::from_json("{\"scale\": \"three\"}"), Error);
  CHECK_THROWS_AS(UdvdConfig::from_json("{\"k\": 4}"), Error);
  // Defaults apply for absent fields.
  CHECK(UdvdConfig::from_json("{}").scale == UdvdConfig{}.scale);
}

TEST_CASE("initialization is deterministic and matches the weight streams") {
  UdvdModel model(mirror_config(), 42);

  // Tensor inventory: input conv (2) + 1 residual block (4) + align.x2 (2)
  // + 3 dynamic blocks (12 each).
  CHECK(model.params().size() == 44);
  size_t expect = 0;
  expect += 8 * 19 * 9 + 8;                    // trunk input
  expect += 2 * (8 * 8 * 9 + 8);               // residual block
  expect += 32 * 8 * 9 + 32;                   // alignment to x2
  for (int r : {2, 1, 2}) {
    expect += 16 * 8 * 9 + 16;                 // head1
    expect += 16 * 16 * 9 + 16;                // head2
    expect += 32 * 16 * 9 + 32;                // head3
    expect += 9 * r * r * 32 * 9 + 9 * r * r;  // kernel prediction
    expect += 16 * 32 * 9 + 16;                // res1
    expect += 3 * r * r * 16 * 9 + 3 * r * r;  // res2
  }
  CHECK(model.weight_count() == expect);

  Parameter* w = model.find_param("trunk.input.weight");
  REQUIRE(w != nullptr);
  CHECK(dsum(w->value) == doctest::Approx(-0.383750149058).epsilon(1e-9));
  CHECK(dsum(model.find_param("align.x2.weight")->value) ==
        doctest::Approx(12.7631545678).epsilon(1e-9));
  CHECK(dsum(model.find_param("dyn0.kpred.weight")->value) ==
        doctest::Approx(-0.692973370544).epsilon(1e-9));

  // Predicted filters start as identity center taps.
  const Tensor& kb = model.find_param("dyn0.kpred.bias")->value;
  REQUIRE(kb.numel() == 36);
  for (int xy = 0; xy < 4; ++xy)
    for (int t = 0; t < 9; ++t)
      CHECK(kb[xy * 9 + t] == (t == 4 ? 1.0f : 0.0f));
  CHECK(dsum(model.find_param("trunk.input.bias")->value) == 0.0);

  UdvdModel again(mirror_config(), 42);
  for (size_t i = 0; i < model.params().size(); ++i) {
    CHECK(model.params()[i].name == again.params()[i].name);
    CHECK(model.params()[i].value.values() == again.params()[i].value.values());
  }
  UdvdModel other(mirror_config(), 43);
  CHECK(dsum(other.find_param("trunk.input.weight")->value) != dsum(w->value));
}

TEST_CASE("forward pass matches the float64 mirror") {
  UdvdModel model(mirror_config(), 42);
  Tensor lr = fill({8001}, 1, 3, 5, 4, 0.0, 1.0);
  Tensor dmap = fill({8002}, 1, 16, 5, 4, 0.0, 1.0);

  auto stages = model.forward_stages(lr, dmap);
  REQUIRE(stages.size() == 3);
  REQUIRE(stages[0].shape() == std::array<int, 4>{1, 3, 10, 8});
  REQUIRE(stages[1].shape() == std::array<int, 4>{1, 3, 10, 8});
  REQUIRE(stages[2].shape() == std::array<int, 4>{1, 3, 20, 16});

  CHECK(dsum(stages[0]) == doctest::Approx(136.039859294).epsilon(1e-5));
  CHECK(dsum(stages[1]) == doctest::Approx(133.762020706).epsilon(1e-5));
  CHECK(dsum(stages[2]) == doctest::Approx(364.70738884).epsilon(1e-5));
  CHECK(stages[0].at(0, 1, 3, 2) == doctest::Approx(0.279735597775).epsilon(1e-4));
  CHECK(stages[0].at(0, 2, 8, 7) == doctest::Approx(0.404155420942).epsilon(1e-4));
  CHECK(stages[1].at(0, 1, 3, 2) == doctest::Approx(0.507199113203).epsilon(1e-4));
  CHECK(stages[1].at(0, 2, 8, 7) == doctest::Approx(0.248158813458).epsilon(1e-4));
  CHECK(stages[2].at(0, 1, 3, 2) == doctest::Approx(0.00237798944285).epsilon(1e-4));
  CHECK(stages[2].at(0, 2, 18, 15) == doctest::Approx(0.648816186036).epsilon(1e-4));

  CHECK(model.infer(lr, dmap).values() == stages[2].values());
}

TEST_CASE("plain upscaler matches the mirror") {
  UdvdConfig cfg = mirror_config();
  cfg.block_seq = "";
  UdvdModel model(cfg, 42);
  CHECK(model.params().size() == 8);  // input + residual block + head
  Tensor lr = fill({8001}, 1, 3, 5, 4, 0.0, 1.0);
  Tensor dmap = fill({8002}, 1, 16, 5, 4, 0.0, 1.0);
  Tensor out = model.infer(lr, dmap);
  REQUIRE(out.shape() == std::array<int, 4>{1, 3, 20, 16});
  CHECK(dsum(out) == doctest::Approx(-21.5392127207).epsilon(1e-5));
  CHECK(out.at(0, 0, 7, 5) == doctest::Approx(2.01144562922).epsilon(1e-4));
}

TEST_CASE("training step reproduces the mirror's losses and gradients") {
  UdvdModel model(mirror_config(), 42);
  Tensor lr = fill({8001}, 1, 3, 5, 4, 0.0, 1.0);
  Tensor dmap = fill({8002}, 1, 16, 5, 4, 0.0, 1.0);
  Tensor hr = fill({8003}, 1, 3, 20, 16, 0.0, 1.0);

  auto res = model.forward_backward(lr, dmap, hr);
  REQUIRE(res.stage_losses.size() == 3);
  CHECK(res.stage_losses[0] == doctest::Approx(0.119868798237).epsilon(1e-4));
  CHECK(res.stage_losses[1] == doctest::Approx(0.153699345664).epsilon(1e-4));
  CHECK(res.stage_losses[2] == doctest::Approx(0.357548273853).epsilon(1e-4));
  CHECK(res.loss == doctest::Approx(0.631116417754).epsilon(1e-4));

  // The tape runs the same kernels as the direct pass, so stage losses
  // recomputed from forward_stages agree bitwise.
  auto stages = model.forward_stages(lr, dmap);
  Tensor t0 = bicubic_resize(hr, 10, 8, true);
  CHECK(res.stage_losses[0] == l2_loss(stages[0], t0));
  CHECK(res.stage_losses[1] == l2_loss(stages[1], t0));
  CHECK(res.stage_losses[2] == l2_loss(stages[2], hr));

  struct Expect {
    const char* name;
    double abs_sum;
    int argmax;
    double value;
  };
  const Expect expected[] = {
      {"trunk.input.weight", 82.7280411189, 472, 0.17895707435},
      {"trunk.input.bias", 1.19144022841, 4, 0.24960629149},
      {"trunk.block0.conv1.weight", 20.1586678921, 518, -0.160530398399},
      {"trunk.block0.conv1.bias", 0.630583906154, 7, 0.192355364633},
      {"trunk.block0.conv2.weight", 22.2366975539, 370, -0.231051047479},
      {"trunk.block0.conv2.bias", 1.03195915876, 2, 0.220693949274},
      {"align.x2.weight", 19.643023596, 1920, 0.0582499468885},
      {"align.x2.bias", 0.688934208616, 26, -0.0655078771656},
      {"dyn0.head1.weight", 8.4820441937, 120, -0.0628442144882},
      {"dyn0.head1.bias", 0.266571419669, 1, 0.0563898092301},
      {"dyn0.kpred.weight", 446.032113666, 8968, 0.376847746346},
      {"dyn0.kpred.bias", 3.97463864757, 31, 0.333143502085},
      {"dyn1.head2.weight", 18.617213572, 280, 0.0673887706679},
      {"dyn1.head2.bias", 0.136868455781, 1, 0.0278864683868},
      {"dyn2.res2.weight", 25.6394674509, 830, -0.118322810309},
      {"dyn2.res2.bias", 0.243230420753, 5, -0.0478786633128},
  };
  for (const Expect& e : expected) {
    CAPTURE(e.name);
    Parameter* p = model.find_param(e.name);
    REQUIRE(p != nullptr);
    REQUIRE(p->grad.numel() == p->value.numel());
    CHECK(dabs_sum(p->grad) == doctest::Approx(e.abs_sum).epsilon(1e-3));
    CHECK(p->grad[e.argmax] == doctest::Approx(e.value).epsilon(1e-3));
  }
}

TEST_CASE("single stage training penalizes only the last output") {
  UdvdConfig cfg = mirror_config();
  cfg.multistage = false;
  UdvdModel model(cfg, 42);
  Tensor lr = fill({8001}, 1, 3, 5, 4, 0.0, 1.0);
  Tensor dmap = fill({8002}, 1, 16, 5, 4, 0.0, 1.0);
  Tensor hr = fill({8003}, 1, 3, 20, 16, 0.0, 1.0);
  auto res = model.forward_backward(lr, dmap, hr);
  REQUIRE(res.stage_losses.size() == 1);
  CHECK(res.loss == res.stage_losses[0]);
  CHECK(res.loss == doctest::Approx(0.357548273853).epsilon(1e-4));
}

TEST_CASE("checkpoints restore weights, optimizer state and step exactly") {
  UdvdConfig cfg = mirror_config();
  cfg.n_res_blocks = 1;
  cfg.trunk_channels = 6;
  cfg.block_seq = "U";
  cfg.scale = 2;
  UdvdModel model(cfg, 7);
  Tensor lr = fill({8010}, 2, 3, 6, 6, 0.0, 1.0);
  Tensor dmap = fill({8011}, 2, 16, 6, 6, 0.0, 1.0);
  Tensor hr = fill({8012}, 2, 3, 12, 12, 0.0, 1.0);

  Adam opt;
  for (int i = 0; i < 3; ++i) {
    model.forward_backward(lr, dmap, hr);
    opt.step(model.params(), 1e-3f);
  }
  TempFile f("tmp_model_ckpt.bin");
  save_checkpoint(f.path, model, &opt, 3);

  Adam opt2;
  LoadedCheckpoint lc = load_checkpoint(f.path, &opt2);
  CHECK(lc.step == 3);
  CHECK(lc.has_optimizer);
  CHECK(opt2.steps_taken() == 3);
  REQUIRE(lc.model.params().size() == model.params().size());
  for (size_t i = 0; i < model.params().size(); ++i) {
    CHECK(lc.model.params()[i].name == model.params()[i].name);
    CHECK(lc.model.params()[i].value.values() == model.params()[i].value.values());
  }
  for (size_t i = 0; i < opt.m().size(); ++i) {
    CHECK(opt2.m()[i].values() == opt.m()[i].values());
    CHECK(opt2.v()[i].values() == opt.v()[i].values());
  }

  // One more identical step on both copies stays in lockstep.
  auto r1 = model.forward_backward(lr, dmap, hr);
  auto r2 = lc.model.forward_backward(lr, dmap, hr);
  CHECK(r1.loss == r2.loss);
  opt.step(model.params(), 1e-3f);
  opt2.step(lc.model.params(), 1e-3f);
  CHECK(model.params()[0].value.values() == lc.model.params()[0].value.values());

  // Loading without an optimizer still restores the weights.
  LoadedCheckpoint plain = load_checkpoint(f.path);
  CHECK_FALSE(plain.has_optimizer);
  CHECK(plain.model.config().block_seq == "U");

  CHECK_THROWS_AS(load_checkpoint("definitely_missing_ckpt.bin"), Error);
}

TEST_CASE("model input validation") {
  UdvdModel model(mirror_config(), 1);
  Tensor lr = fill({8020}, 1, 3, 5, 4, 0.0, 1.0);
  Tensor dmap = fill({8021}, 1, 16, 5, 4, 0.0, 1.0);
  CHECK_THROWS_AS(model.infer(Tensor(1, 1, 5, 4), dmap), Error);
  CHECK_THROWS_AS(model.infer(lr, Tensor(1, 15, 5, 4)), Error);
  CHECK_THROWS_AS(model.infer(lr, Tensor(1, 16, 5, 5)), Error);
  CHECK_THROWS_AS(model.infer(lr, Tensor(2, 16, 5, 4)), Error);
  CHECK_THROWS_AS(model.forward_backward(lr, dmap, Tensor(1, 3, 20, 12)), Error);
  CHECK_THROWS_AS(model.forward_backward(lr, dmap, Tensor(1, 1, 20, 16)), Error);
}
