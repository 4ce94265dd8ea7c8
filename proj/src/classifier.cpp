#include "salmask/classifier.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "salmask/checkpoint.hpp"
#include "salmask/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace salmask {

namespace k = kernels;

Classifier Classifier::init(int num_classes, Rng& rng) {
  Classifier c;
  c.num_classes_ = num_classes;
  int in_ch = 3;
  for (int s = 0; s < 5; ++s) {
    const int out_ch = kStageChannels[s];
    auto& st = c.stages_[s];
    st.w = Tensor(out_ch, in_ch, 3, 3);
    const Real scale = std::sqrt(2.0 / (in_ch * 9));  // fan-in
    for (Real& v : st.w.data) v = scale * rng.normal();
    st.bias.assign(out_ch, 0.0);
    st.gamma.assign(out_ch, 1.0);
    st.beta.assign(out_ch, 0.0);
    in_ch = out_ch;
  }
  c.head_w_ = Tensor(num_classes, 256, 1, 1);
  const Real hscale = std::sqrt(1.0 / 256.0);
  for (Real& v : c.head_w_.data) v = hscale * rng.normal();
  c.head_b_.assign(num_classes, 0.0);
  return c;
}

namespace {

void check_input(const Tensor& images) {
  if (images.c != 3 || images.h != 64 || images.w != 64)
    throw std::runtime_error("classifier expects 64x64x3 inputs, got " + std::to_string(images.h) +
                             "x" + std::to_string(images.w) + "x" + std::to_string(images.c));
}

}  // namespace

ClassifierOutput Classifier::forward(const Tensor& images, ClassifierCache& cache) const {
  check_input(images);
  const int N = images.n;
  cache.input = images;
  ClassifierOutput out;
  const Tensor* x = &cache.input;
  int side = 64;
  for (int s = 0; s < 5; ++s) {
    auto& st = stages_[s];
    auto& sc = cache.stages[s];
    const int ch = kStageChannels[s];
    sc.conv_out = Tensor(N, ch, side, side);
    k::conv3x3_forward(*x, st.w, st.bias, sc.conv_out);
    sc.gn_out = Tensor(N, ch, side, side);
    k::group_norm_forward(sc.conv_out, kGnGroups, st.gamma, st.beta, kGnEps, sc.gn_out, sc.gn_mean,
                          sc.gn_inv_std);
    Tensor relu_out(N, ch, side, side);
    k::relu_forward(sc.gn_out, relu_out);
    side /= 2;
    sc.pool_out = Tensor(N, ch, side, side);
    k::avgpool2_forward(relu_out, sc.pool_out);
    out.activations.layers[s] = sc.pool_out;
    x = &sc.pool_out;
  }
  cache.gap_out = Tensor(N, 256, 1, 1);
  k::global_avgpool_forward(cache.stages[4].pool_out, cache.gap_out);
  out.logits = Tensor(N, num_classes_, 1, 1);
  k::linear_forward(cache.gap_out, head_w_, head_b_, out.logits);
  out.probs = Tensor(N, num_classes_, 1, 1);
  k::softmax(out.logits, out.probs);
  return out;
}

ClassifierOutput Classifier::forward(const Tensor& images) const {
  ClassifierCache cache;
  return forward(images, cache);
}

namespace {

// Shared stage-by-stage backward; weight gradients are optional.
Tensor backward_impl(const Classifier& c, const ClassifierCache& cache, const Tensor& grad_logits,
                     ClassifierGrads* grads) {
  const int N = cache.input.n;
  Tensor g_gap(N, 256, 1, 1);
  k::linear_backward(grad_logits, cache.gap_out, c.head_w(), g_gap,
                     grads != nullptr ? &grads->head_w : nullptr,
                     grads != nullptr ? &grads->head_b : nullptr);
  int side = 2;
  Tensor g = Tensor(N, 256, side, side);
  k::global_avgpool_backward(g_gap, side, side, g);
  for (int s = 4; s >= 0; --s) {
    const auto& st = c.stages()[s];
    const auto& sc = cache.stages[s];
    const int ch = kStageChannels[s];
    side = sc.conv_out.h;
    // pool -> relu -> group norm -> conv
    Tensor g_relu(N, ch, side, side);
    k::avgpool2_backward(g, g_relu);
    Tensor g_gn(N, ch, side, side);
    k::relu_backward(g_relu, sc.gn_out, g_gn);
    Tensor g_conv(N, ch, side, side);
    k::group_norm_backward(g_gn, sc.conv_out, kGnGroups, st.gamma, sc.gn_mean, sc.gn_inv_std,
                           g_conv, grads != nullptr ? &grads->stages[s].gamma : nullptr,
                           grads != nullptr ? &grads->stages[s].beta : nullptr);
    const Tensor& stage_in = s == 0 ? cache.input : cache.stages[s - 1].pool_out;
    if (grads != nullptr)
      k::conv3x3_backward_weights(g_conv, stage_in, grads->stages[s].w, grads->stages[s].bias);
    Tensor g_in(N, stage_in.c, side, side);
    k::conv3x3_backward_data(g_conv, st.w, g_in);
    g = std::move(g_in);
  }
  return g;
}

}  // namespace

Tensor Classifier::backward_input(const ClassifierCache& cache, const Tensor& grad_logits) const {
  return backward_impl(*this, cache, grad_logits, nullptr);
}

void Classifier::backward_full(const ClassifierCache& cache, const Tensor& grad_logits,
                               ClassifierGrads& grads) const {
  backward_impl(*this, cache, grad_logits, &grads);
}

void ClassifierGrads::zero() {
  for (auto& s : stages) {
    s.w.zero();
    std::fill(s.bias.begin(), s.bias.end(), 0.0);
    std::fill(s.gamma.begin(), s.gamma.end(), 0.0);
    std::fill(s.beta.begin(), s.beta.end(), 0.0);
  }
  head_w.zero();
  std::fill(head_b.begin(), head_b.end(), 0.0);
}

std::vector<std::vector<Real>*> ClassifierGrads::arrays() {
  std::vector<std::vector<Real>*> out;
  for (auto& s : stages) {
    out.push_back(&s.w.data);
    out.push_back(&s.bias);
    out.push_back(&s.gamma);
    out.push_back(&s.beta);
  }
  out.push_back(&head_w.data);
  out.push_back(&head_b);
  return out;
}

ClassifierGrads Classifier::make_grads() const {
  ClassifierGrads g;
  for (int s = 0; s < 5; ++s) {
    g.stages[s].w = Tensor(stages_[s].w.n, stages_[s].w.c, 3, 3);
    g.stages[s].bias.assign(stages_[s].bias.size(), 0.0);
    g.stages[s].gamma.assign(stages_[s].gamma.size(), 0.0);
    g.stages[s].beta.assign(stages_[s].beta.size(), 0.0);
  }
  g.head_w = Tensor(head_w_.n, head_w_.c, 1, 1);
  g.head_b.assign(head_b_.size(), 0.0);
  return g;
}

std::vector<std::pair<std::string, std::vector<Real>*>> Classifier::named_params() {
  std::vector<std::pair<std::string, std::vector<Real>*>> out;
  for (int s = 0; s < 5; ++s) {
    const std::string p = "stage" + std::to_string(s + 1) + ".";
    out.emplace_back(p + "w", &stages_[s].w.data);
    out.emplace_back(p + "bias", &stages_[s].bias);
    out.emplace_back(p + "gamma", &stages_[s].gamma);
    out.emplace_back(p + "beta", &stages_[s].beta);
  }
  out.emplace_back("head.w", &head_w_.data);
  out.emplace_back("head.b", &head_b_);
  return out;
}

int64_t Classifier::parameter_count() const {
  int64_t n = 0;
  for (const auto& s : stages_)
    n += s.w.size() + static_cast<int64_t>(s.bias.size() + s.gamma.size() + s.beta.size());
  return n + head_w_.size() + static_cast<int64_t>(head_b_.size());
}

uint64_t Classifier::weight_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::vector<Real>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (size_t i = 0; i < v.size() * sizeof(Real); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& s : stages_) {
    feed(s.w.data);
    feed(s.bias);
    feed(s.gamma);
    feed(s.beta);
  }
  feed(head_w_.data);
  feed(head_b_);
  return h;
}

void Classifier::save(const std::string& path, uint64_t step) const {
  Checkpoint c;
  c.arch = "conv5_gn8";
  c.step = step;
  c.meta = json{{"num_classes", num_classes_}}.dump();
  auto self = const_cast<Classifier*>(this);
  for (auto& [name, values] : self->named_params()) c.arrays.emplace_back(name, *values);
  save_checkpoint(c, path);
}

Classifier Classifier::load(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.arch != "conv5_gn8") throw std::runtime_error("unexpected classifier arch: " + c.arch);
  const int num_classes = json::parse(c.meta).at("num_classes").get<int>();
  Rng dummy(0);
  Classifier out = Classifier::init(num_classes, dummy);
  for (auto& [name, values] : out.named_params()) {
    const auto& stored = c.get(name);
    if (stored.size() != values->size())
      throw std::runtime_error("checkpoint array size mismatch for " + name);
    *values = stored;
  }
  return out;
}

int argmax_row(const Tensor& probs, int row) {
  const Real* p = probs.ptr(row, 0);
  int best = 0;
  for (int k2 = 1; k2 < probs.c; ++k2)
    if (p[k2] > p[best]) best = k2;
  return best;
}

ClassifierPool::ClassifierPool(const std::string& dir) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  const std::string index = (fs::path(dir_) / "index.json").string();
  if (fs::exists(index)) {
    std::ifstream in(index);
    json j;
    in >> j;
    next_seq_ = j.at("next_seq").get<uint64_t>();
    for (const auto& f : j.at("files")) files_.push_back(f.get<std::string>());
  }
}

void ClassifierPool::write_index() const {
  json j{{"next_seq", next_seq_}, {"files", files_}};
  std::ofstream out((fs::path(dir_) / "index.json").string());
  out << j.dump(2) << "\n";
}

void ClassifierPool::push(const Classifier& c) {
  const std::string name = "ckpt_" + std::to_string(next_seq_++) + ".bin";
  c.save((fs::path(dir_) / name).string(), next_seq_ - 1);
  files_.push_back(name);
  if (static_cast<int>(files_.size()) > kCapacity) {
    std::error_code ec;
    fs::remove(fs::path(dir_) / files_.front(), ec);
    files_.erase(files_.begin());
  }
  write_index();
}

Classifier ClassifierPool::sample(Rng& rng) const {
  if (files_.empty()) throw std::runtime_error("classifier pool is empty");
  const int i = rng.uniform_int(static_cast<int>(files_.size()));
  return Classifier::load((fs::path(dir_) / files_[i]).string());
}

}  // namespace salmask
