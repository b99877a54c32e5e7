#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "core/graph.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"

namespace udvd {

int GradCheckReport::checked() const {
  int s = 0;
  for (const auto& it : items) s += it.checked;
  return s;
}

int GradCheckReport::failed() const {
  int s = 0;
  for (const auto& it : items) s += it.failed;
  return s;
}

double GradCheckReport::worst_rel() const {
  double w = 0.0;
  for (const auto& it : items) w = std::max(w, it.worst_rel);
  return w;
}

bool GradCheckReport::ok() const {
  int c = checked();
  return c > 0 && (c - failed()) * 100 >= c * 99;
}

namespace {

constexpr uint64_t kTag = 0x6763686b;  // "gchk"

Tensor rand_tensor(std::initializer_list<uint64_t> key, int n, int c, int h, int w,
                   double lo = -1.0, double hi = 1.0) {
  CounterRng rng(key);
  Tensor t(n, c, h, w);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(i, lo, hi));
  return t;
}

// Pushes every entry at least `margin` away from zero so a finite-difference
// step cannot straddle the ReLU kink.
Tensor away_from_zero(Tensor t, float margin) {
  for (size_t i = 0; i < t.numel(); ++i) t[i] += t[i] < 0.0f ? -margin : margin;
  return t;
}

TensorD widen(const Tensor& t) {
  TensorD out(t.n(), t.c(), t.h(), t.w());
  for (size_t i = 0; i < t.numel(); ++i) out[i] = t[i];
  return out;
}

// Central differences over one leaf tensor. loss_d() must re-evaluate the
// double-precision objective from the current contents of `shadow`; entries
// are perturbed one at a time and restored. max_entries <= 0 probes all.
GradCheckItem probe(std::string name, TensorD& shadow, const Tensor& analytic,
                    const std::function<double()>& loss_d, double step, double tol,
                    int max_entries, uint64_t pick_seed) {
  GradCheckItem item;
  item.name = std::move(name);
  size_t n = shadow.numel();
  std::vector<size_t> picks;
  if (max_entries > 0 && static_cast<size_t>(max_entries) < n) {
    CounterRng rng({pick_seed});
    for (int i = 0; i < max_entries; ++i)
      picks.push_back(rng.index(static_cast<uint64_t>(i), n));
  } else {
    picks.resize(n);
    for (size_t i = 0; i < n; ++i) picks[i] = i;
  }
  for (size_t idx : picks) {
    double keep = shadow[idx];
    shadow[idx] = keep + step;
    double up = loss_d();
    shadow[idx] = keep - step;
    double dn = loss_d();
    shadow[idx] = keep;
    double fd = (up - dn) / (2.0 * step);
    double an = analytic[idx];
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    ++item.checked;
    item.worst_rel = std::max(item.worst_rel, rel);
    if (rel > tol) ++item.failed;
  }
  return item;
}

}  // namespace

GradCheckReport grad_check_ops(uint64_t seed, double step, double tol) {
  GradCheckReport rep;
  auto push = [&rep](GradCheckItem item) { rep.items.push_back(std::move(item)); };

  {  // conv2d: objective is quadratic in each leaf, so central FD is exact.
    Tensor x = rand_tensor({kTag, seed, 1}, 2, 3, 5, 6);
    Tensor w = rand_tensor({kTag, seed, 2}, 4, 3, 3, 3);
    Tensor b = rand_tensor({kTag, seed, 3}, 1, 4, 1, 1);
    Tensor t = rand_tensor({kTag, seed, 4}, 2, 4, 5, 6);
    Graph g;
    int xi = g.variable(x), wi = g.variable(w), bi = g.variable(b);
    g.backward(g.l2_loss(g.conv2d(xi, wi, bi, 1), g.constant(t)));
    TensorD xs = widen(x), ws = widen(w), bs = widen(b), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(conv2d_ref<double>(xs, ws, bs, 1), ts); };
    push(probe("conv2d/input", xs, g.grad(xi), loss_d, step, tol, -1, 0));
    push(probe("conv2d/weight", ws, g.grad(wi), loss_d, step, tol, -1, 0));
    push(probe("conv2d/bias", bs, g.grad(bi), loss_d, step, tol, -1, 0));
  }

  {  // relu, input nudged clear of the kink
    Tensor x = away_from_zero(rand_tensor({kTag, seed, 5}, 2, 4, 5, 6), 0.05f);
    Tensor t = rand_tensor({kTag, seed, 6}, 2, 4, 5, 6);
    Graph g;
    int xi = g.variable(x);
    g.backward(g.l2_loss(g.relu(xi), g.constant(t)));
    TensorD xs = widen(x), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(relu(xs), ts); };
    push(probe("relu/input", xs, g.grad(xi), loss_d, step, tol, -1, 0));
  }

  {  // pixel_shuffle
    Tensor x = rand_tensor({kTag, seed, 7}, 1, 8, 4, 5);
    Tensor t = rand_tensor({kTag, seed, 8}, 1, 2, 8, 10);
    Graph g;
    int xi = g.variable(x);
    g.backward(g.l2_loss(g.pixel_shuffle(xi, 2), g.constant(t)));
    TensorD xs = widen(x), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(pixel_shuffle(xs, 2), ts); };
    push(probe("pixel_shuffle/input", xs, g.grad(xi), loss_d, step, tol, -1, 0));
  }

  {  // concat
    Tensor a = rand_tensor({kTag, seed, 9}, 1, 3, 4, 5);
    Tensor b = rand_tensor({kTag, seed, 10}, 1, 2, 4, 5);
    Tensor t = rand_tensor({kTag, seed, 11}, 1, 5, 4, 5);
    Graph g;
    int ai = g.variable(a), bi = g.variable(b);
    g.backward(g.l2_loss(g.concat(ai, bi), g.constant(t)));
    TensorD as = widen(a), bs = widen(b), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(concat_channels(as, bs), ts); };
    push(probe("concat/a", as, g.grad(ai), loss_d, step, tol, -1, 0));
    push(probe("concat/b", bs, g.grad(bi), loss_d, step, tol, -1, 0));
  }

  {  // add
    Tensor a = rand_tensor({kTag, seed, 12}, 1, 3, 4, 5);
    Tensor b = rand_tensor({kTag, seed, 13}, 1, 3, 4, 5);
    Tensor t = rand_tensor({kTag, seed, 14}, 1, 3, 4, 5);
    Graph g;
    int ai = g.variable(a), bi = g.variable(b);
    g.backward(g.l2_loss(g.add(ai, bi), g.constant(t)));
    TensorD as = widen(a), bs = widen(b), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(add(as, bs), ts); };
    push(probe("add/a", as, g.grad(ai), loss_d, step, tol, -1, 0));
    push(probe("add/b", bs, g.grad(bi), loss_d, step, tol, -1, 0));
  }

  {  // l2_loss as the objective itself
    Tensor p = rand_tensor({kTag, seed, 15}, 1, 3, 6, 6);
    Tensor t = rand_tensor({kTag, seed, 16}, 1, 3, 6, 6);
    Graph g;
    int pi = g.variable(p);
    g.backward(g.l2_loss(pi, g.constant(t)));
    TensorD ps = widen(p), ts = widen(t);
    auto loss_d = [&] { return l2_loss<double>(ps, ts); };
    push(probe("l2_loss/pred", ps, g.grad(pi), loss_d, step, tol, -1, 0));
  }

  // The three dynamic-convolution forms: output is bilinear in (input,
  // kernels), so the objective is again quadratic in each leaf alone.
  struct DynCase {
    const char* name;
    int kc, r;
    bool shared;
  };
  for (const DynCase& dc : {DynCase{"dynconv", 9, 1, true}, DynCase{"dynconv_perchannel", 27, 1, false},
                            DynCase{"dynconv_up", 36, 2, true}}) {
    Tensor x = rand_tensor({kTag, seed, 17, static_cast<uint64_t>(dc.kc)}, 1, 3, 6, 5);
    Tensor kern = rand_tensor({kTag, seed, 18, static_cast<uint64_t>(dc.kc)}, 1, dc.kc, 6, 5);
    Tensor t = rand_tensor({kTag, seed, 19, static_cast<uint64_t>(dc.kc)}, 1, 3, 6 * dc.r, 5 * dc.r);
    Graph g;
    int xi = g.variable(x), ki = g.variable(kern);
    g.backward(g.l2_loss(g.dynamic_conv(xi, ki, 3, dc.r, dc.shared), g.constant(t)));
    TensorD xs = widen(x), ks = widen(kern), ts = widen(t);
    auto loss_d = [&] {
      return l2_loss<double>(dynamic_conv_ref<double>(xs, ks, 3, dc.r, dc.shared), ts);
    };
    push(probe(std::string(dc.name) + "/input", xs, g.grad(xi), loss_d, step, tol, -1, 0));
    push(probe(std::string(dc.name) + "/kernels", ks, g.grad(ki), loss_d, step, tol, -1, 0));
  }

  return rep;
}

GradCheckReport grad_check_model(uint64_t seed, double step, double tol, int per_tensor) {
  UdvdConfig cfg;
  cfg.n_res_blocks = 1;
  cfg.trunk_channels = 8;
  cfg.block_seq = "UD";
  cfg.k = 3;
  cfg.scale = 2;
  UdvdModel model(cfg, seed);

  Tensor lr = rand_tensor({kTag, seed, 100}, 1, 3, 6, 5, 0.0, 1.0);
  Tensor dmap = rand_tensor({kTag, seed, 101}, 1, kMapChannels, 6, 5, 0.0, 1.0);
  Tensor hr = rand_tensor({kTag, seed, 102}, 1, 3, 12, 10, 0.0, 1.0);
  model.forward_backward(lr, dmap, hr);

  std::vector<TensorD> shadow;
  shadow.reserve(model.params().size());
  for (const auto& p : model.params()) shadow.push_back(widen(p.value));
  auto loss_d = [&] { return model.loss_fp64(lr, dmap, hr, shadow); };

  GradCheckReport rep;
  for (size_t i = 0; i < model.params().size(); ++i)
    rep.items.push_back(probe("model/" + model.params()[i].name, shadow[i],
                              model.params()[i].grad, loss_d, step, tol, per_tensor,
                              rng_key({kTag, seed, 200, i})));
  return rep;
}

GradCheckReport grad_check_all(uint64_t seed) {
  GradCheckReport rep = grad_check_ops(seed);
  GradCheckReport m = grad_check_model(seed);
  rep.items.insert(rep.items.end(), m.items.begin(), m.items.end());
  return rep;
}

}  // namespace udvd
