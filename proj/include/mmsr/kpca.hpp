#pragma once

#include <filesystem>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr {

struct KernelParams {
    int degree = 3;
    double gamma = 0.0;  // 0 means 1/D, resolved at fit time
    double coef0 = 1.0;
};

// Polynomial kernel (gamma <x,y> + coef0)^degree.
double poly_kernel(const double* x, const double* y, std::size_t d, const KernelParams& p);
double poly_kernel(const std::vector<double>& x, const std::vector<double>& y,
                   const KernelParams& p);

// Kernel PCA model: centered-Gram eigendecomposition of the training set,
// eigenvector columns scaled by 1/sqrt(eigenvalue) so projected features
// have unit norm, deterministic sign (largest-|entry| positive).
struct KpcaModel {
    Tensor training_points;  // N x D
    Tensor alphas;           // N x K
    std::vector<double> eigenvalues;  // K, descending
    KernelParams params;
    std::vector<double> row_means;  // N, means of the raw training kernel rows
    double grand_mean = 0.0;
    double total_variance = 0.0;  // sum of all nonnegative eigenvalues

    std::size_t input_dim() const { return training_points.shape[1]; }
    std::size_t components() const { return eigenvalues.size(); }
};

KpcaModel kpca_fit(const Tensor& x, std::size_t n_components, KernelParams params = {});

std::vector<double> kpca_transform(const KpcaModel& m, const double* x, std::size_t d);

// Row-wise transform of a T x D matrix into T x K.
Tensor kpca_transform_all(const KpcaModel& m, const Tensor& x);

// Cumulative explained-variance ratios of the retained components.
std::vector<double> explained_variance(const KpcaModel& m);

// JSON header + sibling MTNS tensors next to the given path.
void save_kpca(const KpcaModel& m, const std::filesystem::path& json_path);
KpcaModel load_kpca(const std::filesystem::path& json_path);

}  // namespace mmsr
