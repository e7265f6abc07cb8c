#include "mmsr/kernels.hpp"

#include <algorithm>

namespace mmsr::kernels {
namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_add(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void s_mul(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void s_scale(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void s_relu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(x[i], 0.0);
}

void s_relu_grad(const double* y, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
}

void s_gemv(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = s_dot(a + r * cols, x, cols);
}

void s_gemv_t_acc(const double* a, std::size_t rows, std::size_t cols,
                  const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) s_axpy(x[r], a + r * cols, y, cols);
}

void s_ger_acc(double alpha, const double* x, const double* y,
               double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) s_axpy(alpha * x[r], y, a + r * cols, cols);
}

const Ops kScalar = {
    "scalar", s_dot,  s_axpy, s_add,        s_mul,       s_scale,
    s_relu,   s_relu_grad, s_gemv, s_gemv_t_acc, s_ger_acc,
};

}  // namespace

const Ops& scalar() { return kScalar; }

}  // namespace mmsr::kernels
