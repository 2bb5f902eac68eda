// Times the serial reference kernels against the OpenMP ones and a full
// training step both ways. The two paths are bit-identical by construction;
// this target only measures the speed difference.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tier/encoders.hpp"
#include "tier/kernels.hpp"
#include "tier/losses.hpp"
#include "tier/rng.hpp"
#include "tier/synth_data.hpp"

using namespace tier;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  rng::Stream stream(seed);
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stream.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

int main() {
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  struct Shape {
    std::size_t m, k, n;
  };
  for (Shape s : {Shape{49, 64, 64}, Shape{256, 256, 256}, Shape{512, 512, 512}}) {
    Tensor a = random_matrix(s.m, s.k, 1);
    Tensor b = random_matrix(s.k, s.n, 2);
    Tensor y({s.m, s.n});
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %zux%zux%zu", s.m, s.k, s.n);
    const int reps = s.m < 100 ? 200 : 5;
    double serial = time_ms(
        [&] { kernels::matmul_serial(a.data(), b.data(), y.data(), s.m, s.k, s.n, false, false, false); },
        reps);
    double parallel = time_ms(
        [&] { kernels::matmul_parallel(a.data(), b.data(), y.data(), s.m, s.k, s.n, false, false, false); },
        reps);
    report(name, serial, parallel);
  }

  {
    Tensor x = random_matrix(2048, 49, 3);
    Tensor p({2048, 49});
    double serial = time_ms([&] { kernels::softmax_rows_serial(x.data(), p.data(), 2048, 49); }, 50);
    double parallel = time_ms([&] { kernels::softmax_rows_parallel(x.data(), p.data(), 2048, 49); }, 50);
    report("softmax_rows 2048x49", serial, parallel);
    Tensor h({2048});
    serial = time_ms([&] { kernels::row_entropy_serial(p.data(), h.data(), 2048, 49); }, 50);
    parallel = time_ms([&] { kernels::row_entropy_parallel(p.data(), h.data(), 2048, 49); }, 50);
    report("row_entropy 2048x49", serial, parallel);
  }

  // one full forward+backward step on a default-dims batch, both paths
  {
    DataConfig dcfg;
    dcfg.count_train = 32;
    dcfg.count_val = 0;
    dcfg.count_test = 0;
    Dataset data = generate_dataset(dcfg);
    ModelConfig mcfg;
    ModelParams params = init_params(7, mcfg);
    TierConfig tier_cfg;
    auto step = [&] {
      Tape tape;
      ModelNodes nodes = register_params(tape, params);
      std::vector<EncodedPair> batch;
      for (const SyntheticSample& sample : data.train()) {
        batch.push_back(encode_pair(tape, nodes, mcfg, sample.pixels, sample.tokens));
      }
      LossNodes loss = tier_loss(tape, batch, tier_cfg, nodes.log_temperature);
      tape.backward(loss.total);
    };
    kernels::set_parallel(false);
    double serial = time_ms(step, 5);
    kernels::set_parallel(true);
    double parallel = time_ms(step, 5);
    report("train step (batch 32)", serial, parallel);
  }
  return 0;
}
