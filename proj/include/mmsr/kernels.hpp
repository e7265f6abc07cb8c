#pragma once

#include <cstddef>

// Low-level arithmetic kernels used by the DSP, KPCA and network code.
// Two implementations exist: a scalar reference and an AVX2 variant.
// The active one is picked once at startup from CPU capabilities and can
// be forced (e.g. for equivalence tests) via select().
namespace mmsr::kernels {

struct Ops {
    const char* name;

    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // z[i] = x[i] + y[i]
    void (*add)(const double* x, const double* y, double* z, std::size_t n);
    // z[i] = x[i] * y[i]
    void (*mul)(const double* x, const double* y, double* z, std::size_t n);
    // x[i] *= a
    void (*scale)(double a, double* x, std::size_t n);
    // y[i] = max(x[i], 0)
    void (*relu)(const double* x, double* y, std::size_t n);
    // dx[i] = y[i] > 0 ? dy[i] : 0   (y is the ReLU output)
    void (*relu_grad)(const double* y, const double* dy, double* dx, std::size_t n);
    // y = A x, A row-major rows x cols, y overwritten
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y);
    // y += A^T x, A row-major rows x cols, x has rows entries, y has cols
    void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols,
                       const double* x, double* y);
    // A += alpha * x y^T, x has rows entries, y has cols
    void (*ger_acc)(double alpha, const double* x, const double* y,
                    double* a, std::size_t rows, std::size_t cols);
};

// Scalar reference implementation; always available.
const Ops& scalar();

// AVX2 implementation; null if unsupported by the CPU.
const Ops* avx2();

// The implementation in use (AVX2 when available unless overridden).
const Ops& active();

// Force a specific implementation by name ("scalar" or "avx2").
// Throws ParameterError for unknown/unavailable names.
void select(const char* name);

}  // namespace mmsr::kernels
