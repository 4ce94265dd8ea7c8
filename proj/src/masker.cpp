#include "salmask/masker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "salmask/checkpoint.hpp"
#include "salmask/config_json.hpp"
#include "salmask/kernels.hpp"
#include "salmask/perturb.hpp"

using nlohmann::json;

namespace salmask {

namespace k = kernels;

void MaskerConfig::validate() const {
  if (observed_layers.empty()) throw std::runtime_error("observed_layers must be nonempty");
  for (size_t i = 0; i < observed_layers.size(); ++i) {
    const int l = observed_layers[i];
    if (l < 1 || l > 5)
      throw std::runtime_error("observed layer " + std::to_string(l) + " outside 1..5");
    if (i > 0 && observed_layers[i] <= observed_layers[i - 1])
      throw std::runtime_error("observed_layers must be sorted and unique");
  }
  if (fuse_channels < 1) throw std::runtime_error("fuse_channels must be >= 1");
  if (output_mode != "sigmoid" && output_mode != "gumbel")
    throw std::runtime_error("output_mode must be sigmoid or gumbel");
  if (output_mode == "gumbel") {
    if (gumbel.temperature <= 0.0) throw std::runtime_error("gumbel temperature must be > 0");
    if (gumbel.estimator != "soft" && gumbel.estimator != "hard")
      throw std::runtime_error("gumbel estimator must be soft or hard");
  }
}

Masker Masker::init(const MaskerConfig& config, Rng& rng) {
  config.validate();
  Masker m;
  m.config_ = config;
  for (int layer : config.observed_layers) {
    const int in_ch = kStageChannels[layer - 1];
    Tensor w(config.fuse_channels, in_ch, 3, 3);
    const Real scale = std::sqrt(2.0 / (in_ch * 9));
    for (Real& v : w.data) v = scale * rng.normal();
    m.branch_w_.push_back(std::move(w));
    m.branch_b_.emplace_back(config.fuse_channels, 0.0);
  }
  const int cat_ch = config.fuse_channels * static_cast<int>(config.observed_layers.size());
  m.fuse_w_ = Tensor(1, cat_ch, 3, 3);
  const Real fscale = std::sqrt(2.0 / (cat_ch * 9));
  for (Real& v : m.fuse_w_.data) v = fscale * rng.normal();
  m.fuse_b_.assign(1, 1.0);  // lean toward mask-in at the start (sigmoid(1) ~ 0.73)
  return m;
}

namespace {

int layer_side(int layer) { return 64 >> layer; }

void sigmoid_inplace(const Tensor& logits, Tensor& mask) {
  for (int64_t i = 0; i < logits.size(); ++i) mask.data[i] = 1.0 / (1.0 + std::exp(-logits.data[i]));
}

}  // namespace

MaskerOutput Masker::forward(const ActivationSet& acts, MaskerCache& cache) const {
  const auto& obs = config_.observed_layers;
  for (int layer : obs) {
    const Tensor& a = acts.layers[layer - 1];
    if (a.size() == 0)
      throw std::runtime_error("activation set is missing layer " + std::to_string(layer));
    if (a.h != layer_side(layer))
      throw std::runtime_error("activation layer " + std::to_string(layer) + " has side " +
                               std::to_string(a.h) + ", expected " +
                               std::to_string(layer_side(layer)));
  }
  const int N = acts.layers[obs.front() - 1].n;
  const int fine = layer_side(obs.front());  // finest observed resolution
  const int fuse_ch = config_.fuse_channels;
  const int n_obs = static_cast<int>(obs.size());

  cache.branch_in.resize(n_obs);
  cache.branch_out.resize(n_obs);
  cache.concat = Tensor(N, fuse_ch * n_obs, fine, fine);
  for (int b = 0; b < n_obs; ++b) {
    const Tensor& a = acts.layers[obs[b] - 1];
    cache.branch_in[b] = a;
    const int side = layer_side(obs[b]);
    cache.branch_out[b] = Tensor(N, fuse_ch, side, side);
    k::conv3x3_forward(a, branch_w_[b], branch_b_[b], cache.branch_out[b]);
    // nearest upsample into this branch's slice of the concat buffer
    Tensor up(N, fuse_ch, fine, fine);
    if (side == fine)
      up = cache.branch_out[b];
    else
      k::upsample_nearest_forward(cache.branch_out[b], fine / side, up);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < fuse_ch; ++c)
        std::copy_n(up.ptr(n, c), static_cast<size_t>(fine) * fine,
                    cache.concat.ptr(n, b * fuse_ch + c));
  }
  cache.fuse_out = Tensor(N, 1, fine, fine);
  k::conv3x3_forward(cache.concat, fuse_w_, fuse_b_, cache.fuse_out);
  cache.logits = Tensor(N, 1, 64, 64);
  if (fine == 64)
    cache.logits = cache.fuse_out;
  else
    k::upsample_nearest_forward(cache.fuse_out, 64 / fine, cache.logits);
  cache.mask = Tensor(N, 1, 64, 64);
  sigmoid_inplace(cache.logits, cache.mask);
  cache.sampled = false;
  return MaskerOutput{cache.logits, cache.mask};
}

MaskerOutput Masker::forward(const ActivationSet& acts) const {
  MaskerCache cache;
  return forward(acts, cache);
}

MaskerOutput Masker::forward_train(const ActivationSet& acts, MaskerCache& cache, Rng& rng) const {
  MaskerOutput out = forward(acts, cache);
  if (config_.output_mode == "gumbel") {
    GumbelSample s = gumbel_sample_detail(cache.logits, config_.gumbel, rng);
    cache.mask = s.mask;
    cache.gumbel_soft = std::move(s.soft);
    cache.sampled = true;
    out.mask = cache.mask;
  }
  return out;
}

void Masker::backward(const MaskerCache& cache, const Tensor& grad_mask, MaskerGrads& grads) const {
  const auto& obs = config_.observed_layers;
  const int N = cache.logits.n;
  const int fine = cache.fuse_out.h;
  const int fuse_ch = config_.fuse_channels;

  // mask -> logits through sigmoid, or through the Gumbel relaxation
  // (straight-through for the hard estimator).
  Tensor g_logits(N, 1, 64, 64);
  if (!cache.sampled) {
    for (int64_t i = 0; i < g_logits.size(); ++i) {
      const Real s = cache.mask.data[i];
      g_logits.data[i] = grad_mask.data[i] * s * (1.0 - s);
    }
  } else {
    const Real inv_tau = 1.0 / config_.gumbel.temperature;
    for (int64_t i = 0; i < g_logits.size(); ++i) {
      const Real s = cache.gumbel_soft.data[i];
      g_logits.data[i] = grad_mask.data[i] * s * (1.0 - s) * inv_tau;
    }
  }

  Tensor g_fuse_out(N, 1, fine, fine);
  if (fine == 64)
    g_fuse_out = g_logits;
  else
    k::upsample_nearest_backward(g_logits, 64 / fine, g_fuse_out);
  k::conv3x3_backward_weights(g_fuse_out, cache.concat, grads.fuse_w, grads.fuse_b);
  Tensor g_concat(N, cache.concat.c, fine, fine);
  k::conv3x3_backward_data(g_fuse_out, fuse_w_, g_concat);

  for (size_t b = 0; b < obs.size(); ++b) {
    const int side = layer_side(obs[b]);
    Tensor g_up(N, fuse_ch, fine, fine);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < fuse_ch; ++c)
        std::copy_n(g_concat.ptr(n, static_cast<int>(b) * fuse_ch + c),
                    static_cast<size_t>(fine) * fine, g_up.ptr(n, c));
    Tensor g_branch(N, fuse_ch, side, side);
    if (side == fine)
      g_branch = std::move(g_up);
    else
      k::upsample_nearest_backward(g_up, fine / side, g_branch);
    k::conv3x3_backward_weights(g_branch, cache.branch_in[b], grads.branch_w[b],
                                grads.branch_b[b]);
  }
}

void MaskerGrads::zero() {
  for (auto& w : branch_w) w.zero();
  for (auto& b : branch_b) std::fill(b.begin(), b.end(), 0.0);
  fuse_w.zero();
  std::fill(fuse_b.begin(), fuse_b.end(), 0.0);
}

std::vector<std::vector<Real>*> MaskerGrads::arrays() {
  std::vector<std::vector<Real>*> out;
  for (size_t b = 0; b < branch_w.size(); ++b) {
    out.push_back(&branch_w[b].data);
    out.push_back(&branch_b[b]);
  }
  out.push_back(&fuse_w.data);
  out.push_back(&fuse_b);
  return out;
}

MaskerGrads Masker::make_grads() const {
  MaskerGrads g;
  for (size_t b = 0; b < branch_w_.size(); ++b) {
    g.branch_w.emplace_back(branch_w_[b].n, branch_w_[b].c, 3, 3);
    g.branch_b.emplace_back(branch_b_[b].size(), 0.0);
  }
  g.fuse_w = Tensor(fuse_w_.n, fuse_w_.c, 3, 3);
  g.fuse_b.assign(fuse_b_.size(), 0.0);
  return g;
}

std::vector<std::pair<std::string, std::vector<Real>*>> Masker::named_params() {
  std::vector<std::pair<std::string, std::vector<Real>*>> out;
  for (size_t b = 0; b < branch_w_.size(); ++b) {
    const std::string p = "branch" + std::to_string(config_.observed_layers[b]) + ".";
    out.emplace_back(p + "w", &branch_w_[b].data);
    out.emplace_back(p + "b", &branch_b_[b]);
  }
  out.emplace_back("fuse.w", &fuse_w_.data);
  out.emplace_back("fuse.b", &fuse_b_);
  return out;
}

int64_t Masker::count_parameters() const {
  int64_t n = 0;
  for (size_t b = 0; b < branch_w_.size(); ++b)
    n += branch_w_[b].size() + static_cast<int64_t>(branch_b_[b].size());
  return n + fuse_w_.size() + static_cast<int64_t>(fuse_b_.size());
}

void Masker::save(const std::string& path, uint64_t step) const {
  Checkpoint c;
  c.arch = "masker_v1";
  c.step = step;
  c.meta = to_json(config_).dump();
  auto self = const_cast<Masker*>(this);
  for (auto& [name, values] : self->named_params()) c.arrays.emplace_back(name, *values);
  save_checkpoint(c, path);
}

Masker Masker::load(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.arch != "masker_v1") throw std::runtime_error("unexpected masker arch: " + c.arch);
  const MaskerConfig config = masker_config_from_json(json::parse(c.meta));
  Rng dummy(0);
  Masker out = Masker::init(config, dummy);
  for (auto& [name, values] : out.named_params()) {
    const auto& stored = c.get(name);
    if (stored.size() != values->size())
      throw std::runtime_error("checkpoint array size mismatch for " + name);
    *values = stored;
  }
  return out;
}

}  // namespace salmask
