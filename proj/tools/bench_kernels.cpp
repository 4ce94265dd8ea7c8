// Compares the serial reference kernels against the OpenMP ones and times a
// full classifier forward/backward step at training shape.
#include <chrono>
#include <cstdio>
#include <string>

#include "salmask/classifier.hpp"
#include "salmask/kernels.hpp"
#include "salmask/rng.hpp"

using namespace salmask;
namespace k = salmask::kernels;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void bench_conv(int n, int ci, int co, int side) {
  Rng rng(1);
  Tensor in(n, ci, side, side), w(co, ci, 3, 3), out(n, co, side, side);
  std::vector<Real> bias(co, 0.0);
  for (Real& v : in.data) v = rng.uniform();
  for (Real& v : w.data) v = rng.normal();

  const double flops = 2.0 * n * co * ci * 9.0 * side * side;
  const double t_ref = time_best_of(2, [&] { k::ref::conv3x3_forward(in, w, bias, out); });
  k::set_parallel(false);
  const double t_serial = time_best_of(3, [&] { k::conv3x3_forward(in, w, bias, out); });
  k::set_parallel(true);
  const double t_omp = time_best_of(3, [&] { k::conv3x3_forward(in, w, bias, out); });
  std::printf(
      "conv3x3 n=%d %3dch->%3dch %2dx%2d | ref %7.2f ms | opt-serial %7.2f ms | omp %7.2f ms | "
      "%5.2f GFLOP/s (omp)\n",
      n, ci, co, side, t_ref * 1e3, t_serial * 1e3, t_omp * 1e3, flops / t_omp * 1e-9);
}

void bench_classifier_step(int batch) {
  Rng rng(2);
  Classifier cls = Classifier::init(10, rng);
  Tensor images(batch, 3, 64, 64);
  for (Real& v : images.data) v = rng.uniform();
  ClassifierCache cache;
  ClassifierGrads grads = cls.make_grads();

  const double t_fwd = time_best_of(3, [&] { cls.forward(images, cache); });
  Tensor g_logits(batch, 10, 1, 1, 0.001);
  const double t_bwd_in = time_best_of(3, [&] { cls.backward_input(cache, g_logits); });
  const double t_bwd_full = time_best_of(3, [&] { cls.backward_full(cache, g_logits, grads); });
  std::printf("classifier batch=%d | forward %7.2f ms | input-bwd %7.2f ms | full-bwd %7.2f ms\n",
              batch, t_fwd * 1e3, t_bwd_in * 1e3, t_bwd_full * 1e3);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  bench_conv(8, 16, 32, 32);
  if (!quick) {
    bench_conv(8, 3, 16, 64);
    bench_conv(8, 64, 128, 8);
  }
  bench_classifier_step(8);
  if (!quick) bench_classifier_step(32);
  return 0;
}
