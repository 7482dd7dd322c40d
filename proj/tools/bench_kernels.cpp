// Compares the serial reference gradient kernel against the parallel one
// and reports throughput plus the max absolute difference (expected 0:
// the parallel path accumulates in the same fixed order).

#include <chrono>
#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "p2plab/model.hpp"

using namespace p2plab;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int main() {
  SynthSpec spec;
  spec.n_classes = 2;
  spec.vocab_size = 200;
  spec.doc_len = 40;
  spec.num_docs = 4096;
  spec.seed = 42;
  Dataset ds = gen_synthetic(spec);
  Vocabulary vocab = build_vocab(ds, 1);
  ModelParams params = ModelParams::init(vocab.size(), 64, ds.space.n, 7);

  ParamTensors g_serial = ParamTensors::zeros_like(params);
  ParamTensors g_parallel = ParamTensors::zeros_like(params);

  const int iters = 20;
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  double loss_s = 0.0;
  for (int i = 0; i < iters; ++i)
    loss_s = loss_and_grad_serial(params, vocab, ds.samples, g_serial);
  auto t1 = clock::now();
  double loss_p = 0.0;
  for (int i = 0; i < iters; ++i)
    loss_p = loss_and_grad(params, vocab, ds.samples, g_parallel);
  auto t2 = clock::now();

  auto ms = [](auto a, auto b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  double serial_ms = ms(t0, t1) / iters;
  double parallel_ms = ms(t1, t2) / iters;

#ifdef _OPENMP
  std::printf("threads:          %d\n", omp_get_max_threads());
#else
  std::printf("threads:          1 (OpenMP disabled)\n");
#endif
  std::printf("batch:            %zu samples, dim 64\n", ds.samples.size());
  std::printf("serial kernel:    %8.2f ms/batch\n", serial_ms);
  std::printf("parallel kernel:  %8.2f ms/batch  (%.2fx)\n", parallel_ms,
              serial_ms / parallel_ms);
  std::printf("loss diff:        %.3e\n", std::abs(loss_s - loss_p));
  std::printf("grad diff:        E %.3e  W %.3e  b %.3e\n",
              max_abs_diff(g_serial.embedding, g_parallel.embedding),
              max_abs_diff(g_serial.head_w, g_parallel.head_w),
              max_abs_diff(g_serial.head_b, g_parallel.head_b));
  return 0;
}
