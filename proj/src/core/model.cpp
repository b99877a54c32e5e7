#include "core/model.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "core/degrade.hpp"
#include "core/dynconv.hpp"
#include "core/error.hpp"
#include "core/graph.hpp"
#include "core/nn_ops.hpp"
#include "core/rng.hpp"
#include "core/tensor_io.hpp"

namespace udvd {
namespace {

std::vector<int> prime_factors(int n) {
  std::vector<int> out;
  for (int p = 2; p * p <= n; ++p)
    while (n % p == 0) {
      out.push_back(p);
      n /= p;
    }
  if (n > 1) out.push_back(n);
  return out;
}

// The forward pass is written once against this interface and runs either
// directly on tensors (inference) or through the autodiff tape (training).
struct EagerEngine {
  using Value = Tensor;
  const std::vector<Parameter>* params;
  Value param(int idx) const { return (*params)[idx].value; }
  Value conv(const Value& x, const Value& w, const Value& b) const { return conv2d(x, w, b, 1); }
  Value relu(const Value& x) const { return udvd::relu(x); }
  Value shuffle(const Value& x, int r) const { return pixel_shuffle(x, r); }
  Value concat(const Value& a, const Value& b) const { return concat_channels(a, b); }
  Value add(const Value& a, const Value& b) const { return udvd::add(a, b); }
  Value dynconv(const Value& img, const Value& kern, int k, int r) const {
    PerPixelKernels pk{kern, k, r, true};
    return r > 1 ? dynamic_conv_upsample(img, pk) : dynamic_conv(img, pk);
  }
};

struct TapeEngine {
  using Value = int;
  Graph* g;
  const std::vector<int>* pids;
  Value param(int idx) const { return (*pids)[idx]; }
  Value conv(Value x, Value w, Value b) const { return g->conv2d(x, w, b, 1); }
  Value relu(Value x) const { return g->relu(x); }
  Value shuffle(Value x, int r) const { return g->pixel_shuffle(x, r); }
  Value concat(Value a, Value b) const { return g->concat(a, b); }
  Value add(Value a, Value b) const { return g->add(a, b); }
  Value dynconv(Value img, Value kern, int k, int r) const {
    return g->dynamic_conv(img, kern, k, r, true);
  }
};

TensorD widen(const Tensor& t) {
  TensorD out(t.n(), t.c(), t.h(), t.w());
  for (size_t i = 0; i < t.numel(); ++i) out[i] = t[i];
  return out;
}

// Double-precision twin of EagerEngine, fed parameter values from outside the
// model so callers can perturb them.
struct ShadowEngine {
  using Value = TensorD;
  const std::vector<TensorD>* values;
  Value param(int idx) const { return (*values)[static_cast<size_t>(idx)]; }
  Value conv(const Value& x, const Value& w, const Value& b) const {
    return conv2d_ref<double>(x, w, b, 1);
  }
  Value relu(const Value& x) const { return udvd::relu(x); }
  Value shuffle(const Value& x, int r) const { return pixel_shuffle(x, r); }
  Value concat(const Value& a, const Value& b) const { return concat_channels(a, b); }
  Value add(const Value& a, const Value& b) const { return udvd::add(a, b); }
  Value dynconv(const Value& img, const Value& kern, int k, int r) const {
    return dynamic_conv_ref<double>(img, kern, k, r, true);
  }
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail(ErrorCode::Io, "cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) fail(ErrorCode::Io, "cannot write ", path);
  out << text;
  if (!out.good()) fail(ErrorCode::Io, "short write to ", path);
}

}  // namespace

void UdvdConfig::validate() const {
  if (n_res_blocks < 0 || n_res_blocks > 64)
    fail(ErrorCode::Config, "config: n_res_blocks must be in [0, 64], got ", n_res_blocks);
  if (trunk_channels < 1 || trunk_channels > 1024)
    fail(ErrorCode::Config, "config: trunk_channels must be in [1, 1024], got ", trunk_channels);
  if (k < 1 || k > 15 || k % 2 == 0)
    fail(ErrorCode::Config, "config: k must be odd and in [1, 15], got ", k);
  if (scale < 2 || scale > 4) fail(ErrorCode::Config, "config: scale must be 2, 3 or 4, got ", scale);
  if (block_seq.size() > 16)
    fail(ErrorCode::Config, "config: block_seq has ", block_seq.size(), " blocks, limit is 16");
  int n_up = 0;
  for (char ch : block_seq) {
    if (ch != 'U' && ch != 'D')
      fail(ErrorCode::Config, "config: block_seq may only contain 'U' and 'D', got '", ch, "'");
    if (ch == 'U') ++n_up;
  }
  if (!block_seq.empty()) {
    size_t n_factors = prime_factors(scale).size();
    if (n_up == 0) fail(ErrorCode::Config, "config: block_seq needs at least one 'U' block");
    if (static_cast<size_t>(n_up) > n_factors)
      fail(ErrorCode::Config, "config: ", n_up, " 'U' blocks but scale ", scale, " only splits into ",
           n_factors, " factors");
  }
}

std::vector<int> UdvdConfig::block_rates() const {
  validate();
  std::vector<int> rates(block_seq.size(), 1);
  if (block_seq.empty()) return rates;
  std::vector<size_t> upos;
  for (size_t i = 0; i < block_seq.size(); ++i)
    if (block_seq[i] == 'U') upos.push_back(i);
  std::vector<int> primes = prime_factors(scale);
  for (size_t f = 0; f < primes.size(); ++f) rates[upos[f % upos.size()]] *= primes[f];
  return rates;
}

std::vector<int> UdvdConfig::stage_rates() const {
  if (block_seq.empty()) {
    validate();
    return {scale};
  }
  std::vector<int> out;
  int q = 1;
  for (int r : block_rates()) {
    q *= r;
    out.push_back(q);
  }
  return out;
}

UdvdConfig UdvdConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::Config, "config: ", e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Config, "config: expected a JSON object");
  static const std::set<std::string> known = {"n_res_blocks", "trunk_channels", "block_seq",
                                             "k",            "scale",          "multistage"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail(ErrorCode::Config, "config: unknown field '", item.key(), "'");
  UdvdConfig c;
  try {
    if (j.contains("n_res_blocks")) c.n_res_blocks = j.at("n_res_blocks").get<int>();
    if (j.contains("trunk_channels")) c.trunk_channels = j.at("trunk_channels").get<int>();
    if (j.contains("block_seq")) c.block_seq = j.at("block_seq").get<std::string>();
    if (j.contains("k")) c.k = j.at("k").get<int>();
    if (j.contains("scale")) c.scale = j.at("scale").get<int>();
    if (j.contains("multistage")) c.multistage = j.at("multistage").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, "config: ", e.what());
  }
  c.validate();
  return c;
}

std::string UdvdConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n_res_blocks"] = n_res_blocks;
  j["trunk_channels"] = trunk_channels;
  j["block_seq"] = block_seq;
  j["k"] = k;
  j["scale"] = scale;
  j["multistage"] = multistage;
  return j.dump(2) + "\n";
}

int UdvdModel::add_param(const std::string& name, int c_out, int c_in, int kh, int kw,
                         uint64_t seed, double wscale) {
  Tensor w(c_out, c_in, kh, kw);
  double stddev = std::sqrt(2.0 / (static_cast<double>(c_in) * kh * kw)) * wscale;
  CounterRng rng(rng_key({seed, hash_str(name.c_str())}));
  for (size_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<float>(rng.normal(static_cast<uint64_t>(i)) * stddev);
  params_.emplace_back(name, std::move(w));
  return static_cast<int>(params_.size()) - 1;
}

UdvdModel::ConvRef UdvdModel::add_conv(const std::string& prefix, int c_out, int c_in,
                                       uint64_t seed, double wscale) {
  ConvRef r;
  r.w = add_param(prefix + ".weight", c_out, c_in, 3, 3, seed, wscale);
  params_.emplace_back(prefix + ".bias", Tensor(1, c_out, 1, 1));
  r.b = static_cast<int>(params_.size()) - 1;
  return r;
}

UdvdModel::UdvdModel(const UdvdConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  int tc = cfg_.trunk_channels;
  input_ = add_conv("trunk.input", tc, 3 + kMapChannels, seed);
  for (int i = 0; i < cfg_.n_res_blocks; ++i) {
    std::string p = detail::cat("trunk.block", i);
    trunk_.emplace_back(add_conv(p + ".conv1", tc, tc, seed), add_conv(p + ".conv2", tc, tc, seed));
  }
  std::vector<int> rates = cfg_.block_rates();
  std::set<int> feed_rates;  // resolutions at which some block consumes features
  int q = 1;
  for (int r : rates) {
    if (q > 1) feed_rates.insert(q);
    q *= r;
  }
  for (int fr : feed_rates)
    align_[fr] = add_conv(detail::cat("align.x", fr), tc * fr * fr, tc, seed);
  int k2 = cfg_.k * cfg_.k;
  for (size_t m = 0; m < rates.size(); ++m) {
    DynRefs d;
    d.rate = rates[m];
    std::string p = detail::cat("dyn", m, ".");
    d.head1 = add_conv(p + "head1", 16, tc, seed);
    d.head2 = add_conv(p + "head2", 16, 16, seed);
    d.head3 = add_conv(p + "head3", 32, 16, seed);
    // The predicted filters start as identity taps (bias 1 at the center,
    // damped weights) so every stage begins as a plain pass-through and the
    // per-pixel filtering cannot amplify activations before training shapes
    // it. The residual projection is damped for the same reason.
    d.kpred = add_conv(p + "kpred", k2 * d.rate * d.rate, 32, seed, 0.1);
    Tensor& kb = params_[d.kpred.b].value;
    for (int xy = 0; xy < d.rate * d.rate; ++xy) kb[xy * k2 + (k2 - 1) / 2] = 1.0f;
    d.res1 = add_conv(p + "res1", 16, 32, seed);
    d.res2 = add_conv(p + "res2", 3 * d.rate * d.rate, 16, seed, 0.1);
    dyn_.push_back(d);
  }
  if (dyn_.empty()) head_ = add_conv("head", 3 * cfg_.scale * cfg_.scale, tc, seed);
}

Parameter* UdvdModel::find_param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

size_t UdvdModel::weight_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void UdvdModel::check_inputs(const Tensor& lr, const Tensor& dmap) const {
  if (lr.empty() || lr.c() != 3)
    fail_shape("model: low-res input must be (n,3,h,w), got ", shape_str(lr));
  if (dmap.n() != lr.n() || dmap.c() != kMapChannels || dmap.h() != lr.h() || dmap.w() != lr.w())
    fail_shape("model: degradation map must be (", lr.n(), ",", kMapChannels, ",", lr.h(), ",",
               lr.w(), "), got ", shape_str(dmap));
}

template <class Engine>
std::vector<typename Engine::Value> UdvdModel::run(
    Engine& e, typename Engine::Value lr, typename Engine::Value dmap,
    std::vector<typename Engine::Value>* kerns) const {
  using V = typename Engine::Value;
  auto conv = [&e](const V& x, const ConvRef& r) { return e.conv(x, e.param(r.w), e.param(r.b)); };

  V f = conv(e.concat(lr, dmap), input_);
  for (const auto& blk : trunk_) f = e.add(f, conv(e.relu(conv(f, blk.first)), blk.second));

  std::vector<V> stages;
  if (dyn_.empty()) {
    stages.push_back(e.shuffle(conv(f, head_), cfg_.scale));
    return stages;
  }

  V image = lr;
  int rcum = 1;
  std::map<int, V> feats_at;  // trunk features aligned per resolution, shared
  feats_at.emplace(1, f);
  for (const DynRefs& d : dyn_) {
    auto it = feats_at.find(rcum);
    if (it == feats_at.end())
      it = feats_at.emplace(rcum, e.shuffle(conv(f, align_.at(rcum)), rcum)).first;
    V h = e.relu(conv(it->second, d.head1));
    h = e.relu(conv(h, d.head2));
    h = conv(h, d.head3);
    V kern = conv(h, d.kpred);
    if (kerns) kerns->push_back(kern);
    V res = conv(e.relu(conv(h, d.res1)), d.res2);
    if (d.rate > 1) res = e.shuffle(res, d.rate);
    image = e.add(e.dynconv(image, kern, cfg_.k, d.rate), res);
    rcum *= d.rate;
    stages.push_back(image);
  }
  return stages;
}

std::vector<Tensor> UdvdModel::forward_stages(const Tensor& lr, const Tensor& dmap) const {
  check_inputs(lr, dmap);
  EagerEngine e{&params_};
  return run(e, lr, dmap);
}

Tensor UdvdModel::infer(const Tensor& lr, const Tensor& dmap) const {
  return forward_stages(lr, dmap).back();
}

std::vector<Tensor> UdvdModel::predict_kernels(const Tensor& lr, const Tensor& dmap) const {
  check_inputs(lr, dmap);
  EagerEngine e{&params_};
  std::vector<Tensor> kerns;
  run(e, lr, dmap, &kerns);
  return kerns;
}

UdvdModel::StepResult UdvdModel::forward_backward(const Tensor& lr, const Tensor& dmap,
                                                  const Tensor& hr) {
  check_inputs(lr, dmap);
  if (hr.n() != lr.n() || hr.c() != 3 || hr.h() != lr.h() * cfg_.scale ||
      hr.w() != lr.w() * cfg_.scale)
    fail_shape("model: ground truth must be (", lr.n(), ",3,", lr.h() * cfg_.scale, ",",
               lr.w() * cfg_.scale, "), got ", shape_str(hr));

  Graph g;
  std::vector<int> pids(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) pids[i] = g.variable(params_[i].value);
  TapeEngine e{&g, &pids};
  std::vector<int> stages = run(e, g.constant(lr), g.constant(dmap));

  std::vector<int> srates = cfg_.stage_rates();
  StepResult result;
  int total = -1;
  for (size_t m = 0; m < stages.size(); ++m) {
    if (!cfg_.multistage && m + 1 != stages.size()) continue;
    int q = srates[m];
    Tensor target = (q == cfg_.scale) ? hr : bicubic_resize(hr, lr.h() * q, lr.w() * q, true);
    int lnode = g.l2_loss(stages[m], g.constant(std::move(target)));
    result.stage_losses.push_back(g.value(lnode)[0]);
    total = (total < 0) ? lnode : g.axpy(total, lnode, 1.0f);
  }
  result.loss = g.value(total)[0];
  g.backward(total);
  for (size_t i = 0; i < params_.size(); ++i) params_[i].grad = g.grad(pids[i]);
  return result;
}

double UdvdModel::loss_fp64(const Tensor& lr, const Tensor& dmap, const Tensor& hr,
                            const std::vector<TensorD>& values) const {
  check_inputs(lr, dmap);
  if (hr.n() != lr.n() || hr.c() != 3 || hr.h() != lr.h() * cfg_.scale ||
      hr.w() != lr.w() * cfg_.scale)
    fail_shape("model: ground truth must be (", lr.n(), ",3,", lr.h() * cfg_.scale, ",",
               lr.w() * cfg_.scale, "), got ", shape_str(hr));
  if (values.size() != params_.size())
    fail_param("model: expected ", params_.size(), " parameter tensors, got ", values.size());
  for (size_t i = 0; i < params_.size(); ++i)
    if (values[i].n() != params_[i].value.n() || values[i].c() != params_[i].value.c() ||
        values[i].h() != params_[i].value.h() || values[i].w() != params_[i].value.w())
      fail_shape("model: parameter ", params_[i].name, " has shape ",
                 shape_str(params_[i].value), " but was given ", shape_str(values[i]));

  ShadowEngine e{&values};
  std::vector<TensorD> stages = run(e, widen(lr), widen(dmap));
  std::vector<int> srates = cfg_.stage_rates();
  double total = 0.0;
  for (size_t m = 0; m < stages.size(); ++m) {
    if (!cfg_.multistage && m + 1 != stages.size()) continue;
    int q = srates[m];
    Tensor target = (q == cfg_.scale) ? hr : bicubic_resize(hr, lr.h() * q, lr.w() * q, true);
    total += l2_loss<double>(stages[m], widen(target));
  }
  return total;
}

void save_checkpoint(const std::string& path, const UdvdModel& model, const Adam* opt,
                     int64_t step) {
  NamedTensors nt;
  for (const auto& p : model.params()) nt.put(p.name, to_ten(p.value));
  if (opt && opt->steps_taken() > 0) {
    if (opt->m().size() != model.params().size())
      fail(ErrorCode::Config, "checkpoint: optimizer tracks ", opt->m().size(),
           " tensors but the model has ", model.params().size());
    for (size_t i = 0; i < model.params().size(); ++i) {
      nt.put("opt.m." + model.params()[i].name, to_ten(opt->m()[i]));
      nt.put("opt.v." + model.params()[i].name, to_ten(opt->v()[i]));
    }
    // Step counters are exact in float up to 2^24; training runs are far
    // shorter than that.
    nt.put("opt.t", to_ten(Tensor::scalar(static_cast<float>(opt->steps_taken()))));
  }
  nt.put("train.step", to_ten(Tensor::scalar(static_cast<float>(step))));
  save_container(nt, path);
  write_text_file(path + ".json", model.config().to_json());
}

LoadedCheckpoint load_checkpoint(const std::string& path, Adam* opt) {
  UdvdConfig cfg = UdvdConfig::from_json(read_text_file(path + ".json"));
  NamedTensors nt = load_container(path);
  LoadedCheckpoint out{UdvdModel(cfg, 0), 0, false};
  for (auto& p : out.model.params()) {
    const TenData* t = nt.find(p.name);
    if (!t) fail(ErrorCode::Io, "checkpoint: missing tensor '", p.name, "'");
    Tensor val = tensor_from_ten(*t);
    if (!val.same_shape(p.value))
      fail(ErrorCode::Io, "checkpoint: '", p.name, "' is ", shape_str(val), ", expected ",
           shape_str(p.value));
    p.value = std::move(val);
  }
  const TenData* step = nt.find("train.step");
  if (!step || step->numel() != 1) fail(ErrorCode::Io, "checkpoint: missing step counter");
  out.step = static_cast<int64_t>(step->values[0]);
  if (const TenData* t = nt.find("opt.t"); t && opt) {
    if (t->numel() != 1) fail(ErrorCode::Io, "checkpoint: malformed optimizer step counter");
    std::vector<Tensor> m, v;
    for (const auto& p : out.model.params()) {
      const TenData* tm = nt.find("opt.m." + p.name);
      const TenData* tv = nt.find("opt.v." + p.name);
      if (!tm || !tv) fail(ErrorCode::Io, "checkpoint: optimizer state for '", p.name, "' missing");
      Tensor vm = tensor_from_ten(*tm), vv = tensor_from_ten(*tv);
      if (!vm.same_shape(p.value) || !vv.same_shape(p.value))
        fail(ErrorCode::Io, "checkpoint: optimizer state for '", p.name, "' has the wrong shape");
      m.push_back(std::move(vm));
      v.push_back(std::move(vv));
    }
    opt->restore(std::move(m), std::move(v), static_cast<int64_t>(t->values[0]));
    out.has_optimizer = true;
  }
  return out;
}

}  // namespace udvd
