#pragma once

#include <cstdlib>

#if defined(__unix__) || defined(__APPLE__)
#include <dlfcn.h>
#define COCOANET_HAS_DLOPEN 1
#else
#define COCOANET_HAS_DLOPEN 0
#endif

namespace cocoanet::blas {

// Row-major GEMM, resolved against OpenBLAS at runtime via dlopen. Loading
// instead of linking matters: OpenBLAS picks its kernel from OPENBLAS_CORETYPE
// in a library constructor, so the variable must be set before the library is
// mapped. Under some hypervisors the CPUID-based autodetection lands on the
// generic Prescott kernel (observed: 36 GFLOP/s instead of ~75 on the same
// core), hence the explicit core type below. A user-provided value always
// wins. When no BLAS is available the blocked fallback keeps results correct.

namespace detail {

using sgemm_fn = void (*)(int, int, int, int, int, int, float, const float*, int,
                          const float*, int, float, float*, int);
using dgemm_fn = void (*)(int, int, int, int, int, int, double, const double*, int,
                          const double*, int, double, double*, int);
using set_threads_fn = void (*)(int);

inline constexpr int kRowMajor = 101;
inline constexpr int kNoTrans = 111;
inline constexpr int kTrans = 112;

struct Backend {
    sgemm_fn sgemm = nullptr;
    dgemm_fn dgemm = nullptr;
    set_threads_fn set_threads = nullptr;
    bool external = false;
};

inline Backend load_backend() {
    Backend b;
#if COCOANET_HAS_DLOPEN
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    if (!std::getenv("OPENBLAS_CORETYPE")) {
        if (__builtin_cpu_supports("avx512f"))
            setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
        else if (__builtin_cpu_supports("avx2"))
            setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
    }
#endif
    void* handle = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
    if (!handle) handle = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
    if (handle) {
        b.sgemm = reinterpret_cast<sgemm_fn>(dlsym(handle, "cblas_sgemm"));
        b.dgemm = reinterpret_cast<dgemm_fn>(dlsym(handle, "cblas_dgemm"));
        b.set_threads = reinterpret_cast<set_threads_fn>(dlsym(handle, "openblas_set_num_threads"));
        if (b.sgemm && b.dgemm) {
            b.external = true;
            if (b.set_threads) b.set_threads(1);
            return b;
        }
        b = Backend{};
    }
#endif
    return b;
}

inline Backend& backend() {
    static Backend b = load_backend();
    return b;
}

// Straightforward ikj loop; the j-inner accumulation vectorizes and keeps
// the fallback usable for the test suite's small problems.
template <typename T>
void gemm_fallback(bool trans_a, bool trans_b, int m, int n, int k, T alpha,
                   const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * ldc;
        if (beta == T{0}) {
            for (int j = 0; j < n; ++j) crow[j] = T{0};
        } else if (beta != T{1}) {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
    }
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * ldc;
        for (int p = 0; p < k; ++p) {
            const T av = alpha * (trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                                          : a[static_cast<std::size_t>(i) * lda + p]);
            if (av == T{0}) continue;
            const T* brow = trans_b ? nullptr : b + static_cast<std::size_t>(p) * ldb;
            if (!trans_b) {
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            } else {
                for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<std::size_t>(j) * ldb + p];
            }
        }
    }
}

} // namespace detail

inline bool using_external() { return detail::backend().external; }

inline void set_threads(int n) {
    auto& b = detail::backend();
    if (b.set_threads) b.set_threads(n < 1 ? 1 : n);
}

// C[m x n] = alpha * op(A) op(B) + beta * C, all row-major.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
    auto& be = detail::backend();
    if (be.external) {
        be.sgemm(detail::kRowMajor, trans_a ? detail::kTrans : detail::kNoTrans,
                 trans_b ? detail::kTrans : detail::kNoTrans, m, n, k, alpha, a, lda,
                 b, ldb, beta, c, ldc);
    } else {
        detail::gemm_fallback(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta,
                 double* c, int ldc) {
    auto& be = detail::backend();
    if (be.external) {
        be.dgemm(detail::kRowMajor, trans_a ? detail::kTrans : detail::kNoTrans,
                 trans_b ? detail::kTrans : detail::kNoTrans, m, n, k, alpha, a, lda,
                 b, ldb, beta, c, ldc);
    } else {
        detail::gemm_fallback(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

} // namespace cocoanet::blas
