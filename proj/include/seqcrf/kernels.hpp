#pragma once

#include <cstddef>
#include <functional>

// Dense kernels used by the autodiff engine and the batched inference paths.
//
// Every kernel has a serial reference version and an OpenMP version. The
// OpenMP versions partition work by output row (or by batch item), and each
// output element is accumulated in the same order as the serial loop, so both
// backends produce bit-identical results regardless of thread count.
namespace seqcrf::kernels {

enum class Backend { kSerial, kParallel };

void set_backend(Backend backend);
Backend backend();

namespace serial {

// C[MxN] += A[MxK] * B[KxN]
template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
// C[MxN] += A[MxK] * B[NxK]^T
template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
// C[MxN] += A[KxM]^T * B[KxN]
template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace serial

namespace parallel {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace parallel

// Dispatch on the active backend.
template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);
template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* a, const S* b, S* c);

// Runs body(i) for i in [0, n). Bodies must write disjoint outputs.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace seqcrf::kernels
