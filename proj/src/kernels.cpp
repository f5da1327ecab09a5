#include "seqcrf/kernels.hpp"

#include <atomic>

namespace seqcrf::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::kParallel};

// Small products are not worth a parallel region.
constexpr std::size_t kParallelWorkThreshold = 1 << 15;
}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

namespace serial {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S aval = a[i * k + p];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const S* brow = b + j * k;
      S acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S aval = a[p * m + i];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace serial

namespace parallel {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWorkThreshold)
  for (long i = 0; i < rows; ++i) {
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S aval = a[i * k + p];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWorkThreshold)
  for (long i = 0; i < rows; ++i) {
    const S* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const S* brow = b + j * k;
      S acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelWorkThreshold)
  for (long i = 0; i < rows; ++i) {
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S aval = a[p * m + i];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace parallel

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  if (backend() == Backend::kParallel) {
    parallel::gemm_nn(m, n, k, a, b, c);
  } else {
    serial::gemm_nn(m, n, k, a, b, c);
  }
}

template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  if (backend() == Backend::kParallel) {
    parallel::gemm_nt(m, n, k, a, b, c);
  } else {
    serial::gemm_nt(m, n, k, a, b, c);
  }
}

template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c) {
  if (backend() == Backend::kParallel) {
    parallel::gemm_tn(m, n, k, a, b, c);
  } else {
    serial::gemm_tn(m, n, k, a, b, c);
  }
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (backend() == Backend::kParallel) {
    parallel::for_each_index(n, body);
  } else {
    serial::for_each_index(n, body);
  }
}

#define SEQCRF_INSTANTIATE_GEMM(S)                                                         \
  template void serial::gemm_nn<S>(std::size_t, std::size_t, std::size_t, const S*,        \
                                   const S*, S*);                                          \
  template void serial::gemm_nt<S>(std::size_t, std::size_t, std::size_t, const S*,        \
                                   const S*, S*);                                          \
  template void serial::gemm_tn<S>(std::size_t, std::size_t, std::size_t, const S*,        \
                                   const S*, S*);                                          \
  template void parallel::gemm_nn<S>(std::size_t, std::size_t, std::size_t, const S*,      \
                                     const S*, S*);                                        \
  template void parallel::gemm_nt<S>(std::size_t, std::size_t, std::size_t, const S*,      \
                                     const S*, S*);                                        \
  template void parallel::gemm_tn<S>(std::size_t, std::size_t, std::size_t, const S*,      \
                                     const S*, S*);                                        \
  template void gemm_nn<S>(std::size_t, std::size_t, std::size_t, const S*, const S*, S*); \
  template void gemm_nt<S>(std::size_t, std::size_t, std::size_t, const S*, const S*, S*); \
  template void gemm_tn<S>(std::size_t, std::size_t, std::size_t, const S*, const S*, S*);

SEQCRF_INSTANTIATE_GEMM(float)
SEQCRF_INSTANTIATE_GEMM(double)

#undef SEQCRF_INSTANTIATE_GEMM

}  // namespace seqcrf::kernels
