// AVX2 variants of the arithmetic kernels. Compiled with -mavx2 -mfma in a
// separate translation unit; callers must go through kernels::active() so
// this code never runs on CPUs without AVX2.
#include "mmsr/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace mmsr::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_add(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void v_mul(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void v_scale(double a, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void v_relu(const double* x, double* y, std::size_t n) {
    __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_grad(const double* y, const double* dy, double* dx, std::size_t n) {
    __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
}

void v_gemv(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = v_dot(a + r * cols, x, cols);
}

void v_gemv_t_acc(const double* a, std::size_t rows, std::size_t cols,
                  const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) v_axpy(x[r], a + r * cols, y, cols);
}

void v_ger_acc(double alpha, const double* x, const double* y,
               double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) v_axpy(alpha * x[r], y, a + r * cols, cols);
}

const Ops kAvx2 = {
    "avx2", v_dot,  v_axpy, v_add,        v_mul,       v_scale,
    v_relu, v_relu_grad, v_gemv, v_gemv_t_acc, v_ger_acc,
};

}  // namespace

const Ops* avx2() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")
               ? &kAvx2
               : nullptr;
}

}  // namespace mmsr::kernels

#else

namespace mmsr::kernels {
const Ops* avx2() { return nullptr; }
}  // namespace mmsr::kernels

#endif
