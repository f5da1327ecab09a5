// Serial vs OpenMP kernels: GEMM variants and batched model inference.
// Also checks that both backends produce bit-identical results.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include <omp.h>

#include "seqcrf/kernels.hpp"
#include "seqcrf/model.hpp"
#include "seqcrf/synth.hpp"

namespace {

using namespace seqcrf;
using Clock = std::chrono::steady_clock;

template <typename F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

void bench_gemm(std::size_t m, std::size_t n, std::size_t k) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> a(m * k), b(k * n), bt(n * k), at(k * m);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  for (auto& v : bt) v = u(rng);
  for (auto& v : at) v = u(rng);
  struct Variant {
    const char* name;
    void (*serial)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
    void (*parallel)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
    const float* lhs;
    const float* rhs;
  } variants[] = {
      {"nn", kernels::serial::gemm_nn<float>, kernels::parallel::gemm_nn<float>, a.data(), b.data()},
      {"nt", kernels::serial::gemm_nt<float>, kernels::parallel::gemm_nt<float>, a.data(), bt.data()},
      {"tn", kernels::serial::gemm_tn<float>, kernels::parallel::gemm_tn<float>, at.data(), b.data()},
  };
  for (const auto& v : variants) {
    std::vector<float> cs(m * n), cp(m * n);
    const double ts = best_of(5, [&] {
      std::fill(cs.begin(), cs.end(), 0.0f);
      v.serial(m, n, k, v.lhs, v.rhs, cs.data());
    });
    const double tp = best_of(5, [&] {
      std::fill(cp.begin(), cp.end(), 0.0f);
      v.parallel(m, n, k, v.lhs, v.rhs, cp.data());
    });
    const bool same = std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(float)) == 0;
    std::printf("gemm_%s %4zux%4zux%4zu  serial %8.3f ms  parallel %8.3f ms  speedup %5.2fx  %s\n", v.name, m, n, k,
                ts, tp, ts / tp, same ? "identical" : "MISMATCH");
  }
}

void bench_inference() {
  const Corpus corpus = synth_generate(3, 256);
  const auto sentences = all_sentences(corpus);
  const Vocabulary vocab = Vocabulary::build(sentences);
  const auto batches = make_batches(sentences, vocab, LabelSpace{}, 64);
  for (ModelKind kind : kAllModelKinds) {
    ModelDims dims;
    dims.vocab = vocab.size();
    dims.embedding = 64;
    dims.hidden = 64;
    SequenceModel<float> model(kind, dims);
    model.init(11);
    std::vector<std::vector<int>> serial_out, parallel_out;
    auto run = [&](std::vector<std::vector<int>>& out) {
      out.clear();
      for (const auto& b : batches) {
        auto p = model.predict(b);
        out.insert(out.end(), p.begin(), p.end());
      }
    };
    kernels::set_backend(kernels::Backend::kSerial);
    const double ts = best_of(3, [&] { run(serial_out); });
    kernels::set_backend(kernels::Backend::kParallel);
    const double tp = best_of(3, [&] { run(parallel_out); });
    std::printf("predict %-9s 256 sentences  serial %8.2f ms  parallel %8.2f ms  speedup %5.2fx  %s\n",
                std::string(model_kind_name(kind)).c_str(), ts, tp, ts / tp,
                serial_out == parallel_out ? "identical" : "MISMATCH");
  }
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  bench_gemm(64, 256, 128);
  bench_gemm(64, 800, 200);
  bench_gemm(256, 256, 256);
  bench_inference();
  return 0;
}
