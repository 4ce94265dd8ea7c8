#include <cmath>

#include "doctest.h"
#include "salmask/kernels.hpp"
#include "salmask/rng.hpp"

using namespace salmask;
namespace k = salmask::kernels;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  for (Real& v : t.data) v = scale * rng.normal();
  return t;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("optimized conv matches the serial reference bit for bit") {
  Rng rng(7);
  Tensor in = random_tensor(3, 5, 17, 13, rng);
  Tensor w = random_tensor(4, 5, 3, 3, rng);
  std::vector<Real> bias{0.1, -0.2, 0.3, 0.0};
  Tensor out_ref(3, 4, 17, 13), out_opt(3, 4, 17, 13);
  k::ref::conv3x3_forward(in, w, bias, out_ref);
  for (bool parallel : {false, true}) {
    k::set_parallel(parallel);
    k::conv3x3_forward(in, w, bias, out_opt);
    CHECK(bit_identical(out_ref, out_opt));
  }
  k::set_parallel(true);
}

TEST_CASE("conv backward matches finite differences") {
  Rng rng(11);
  Tensor in = random_tensor(2, 3, 6, 5, rng);
  Tensor w = random_tensor(2, 3, 3, 3, rng, 0.5);
  std::vector<Real> bias{0.05, -0.1};
  Tensor out(2, 2, 6, 5);
  // scalar loss: weighted sum of outputs
  Tensor weights = random_tensor(2, 2, 6, 5, rng);
  auto loss = [&]() {
    k::conv3x3_forward(in, w, bias, out);
    Real s = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) s += out.data[i] * weights.data[i];
    return s;
  };
  loss();
  Tensor gin(2, 3, 6, 5);
  Tensor gw(2, 3, 3, 3);
  std::vector<Real> gb(2);
  k::conv3x3_backward_data(weights, w, gin);
  k::conv3x3_backward_weights(weights, in, gw, gb);
  const double h = 1e-6;
  for (int64_t i : {int64_t(0), int64_t(17), in.size() - 1}) {
    const Real save = in.data[i];
    in.data[i] = save + h;
    const Real lp = loss();
    in.data[i] = save - h;
    const Real lm = loss();
    in.data[i] = save;
    CHECK(gin.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
  }
  for (int64_t i : {int64_t(0), int64_t(13), w.size() - 1}) {
    const Real save = w.data[i];
    w.data[i] = save + h;
    const Real lp = loss();
    w.data[i] = save - h;
    const Real lm = loss();
    w.data[i] = save;
    CHECK(gw.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("group norm matches reference and its backward matches finite differences") {
  Rng rng(13);
  Tensor in = random_tensor(2, 4, 5, 5, rng);
  std::vector<Real> gamma{1.0, 1.2, 0.8, 1.1}, beta{0.0, 0.1, -0.1, 0.2};
  Tensor out_ref(2, 4, 5, 5), out_opt(2, 4, 5, 5);
  std::vector<Real> mean_r, istd_r, mean_o, istd_o;
  k::ref::group_norm_forward(in, 2, gamma, beta, 1e-5, out_ref, mean_r, istd_r);
  k::group_norm_forward(in, 2, gamma, beta, 1e-5, out_opt, mean_o, istd_o);
  CHECK(bit_identical(out_ref, out_opt));

  Tensor weights = random_tensor(2, 4, 5, 5, rng);
  auto loss = [&]() {
    k::group_norm_forward(in, 2, gamma, beta, 1e-5, out_opt, mean_o, istd_o);
    Real s = 0.0;
    for (int64_t i = 0; i < out_opt.size(); ++i) s += out_opt.data[i] * weights.data[i];
    return s;
  };
  loss();
  Tensor gin(2, 4, 5, 5);
  std::vector<Real> dgamma(4), dbeta(4);
  k::group_norm_backward(weights, in, 2, gamma, mean_o, istd_o, gin, &dgamma, &dbeta);
  const double h = 1e-6;
  for (int64_t i : {int64_t(3), int64_t(42), in.size() - 2}) {
    const Real save = in.data[i];
    in.data[i] = save + h;
    const Real lp = loss();
    in.data[i] = save - h;
    const Real lm = loss();
    in.data[i] = save;
    CHECK(gin.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
  }
  for (int c = 0; c < 4; ++c) {
    const Real save = gamma[c];
    gamma[c] = save + h;
    const Real lp = loss();
    gamma[c] = save - h;
    const Real lm = loss();
    gamma[c] = save;
    CHECK(dgamma[c] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("pooling and upsampling invert shapes and pass gradients") {
  Rng rng(17);
  Tensor in = random_tensor(1, 2, 8, 8, rng);
  Tensor pooled(1, 2, 4, 4);
  k::avgpool2_forward(in, pooled);
  CHECK(pooled.at(0, 0, 0, 0) ==
        doctest::Approx(0.25 * (in.at(0, 0, 0, 0) + in.at(0, 0, 0, 1) + in.at(0, 0, 1, 0) +
                                in.at(0, 0, 1, 1))));

  Tensor up(1, 2, 8, 8);
  k::upsample_nearest_forward(pooled, 2, up);
  CHECK(up.at(0, 0, 5, 7) == pooled.at(0, 0, 2, 3));
  Tensor up_ref(1, 2, 8, 8);
  k::ref::upsample_nearest_forward(pooled, 2, up_ref);
  CHECK(bit_identical(up, up_ref));

  // upsample backward sums each block
  Tensor gout(1, 2, 8, 8, 1.0);
  Tensor gin(1, 2, 4, 4);
  k::upsample_nearest_backward(gout, 2, gin);
  for (Real v : gin.data) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(23);
  Tensor logits = random_tensor(4, 10, 1, 1, rng, 3.0);
  Tensor probs(4, 10, 1, 1);
  k::softmax(logits, probs);
  for (int n = 0; n < 4; ++n) {
    Real s = 0.0;
    for (int c = 0; c < 10; ++c) {
      CHECK(probs.at(n, c, 0, 0) >= 0.0);
      s += probs.at(n, c, 0, 0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}
