#include "mmsr/kpca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmsr/container.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/kernels.hpp"

namespace mmsr {

double poly_kernel(const double* x, const double* y, std::size_t d, const KernelParams& p) {
    const double g = p.gamma == 0.0 ? 1.0 / double(d) : p.gamma;
    const double base = g * kernels::active().dot(x, y, d) + p.coef0;
    double r = 1.0;
    for (int i = 0; i < p.degree; ++i) r *= base;
    return r;
}

double poly_kernel(const std::vector<double>& x, const std::vector<double>& y,
                   const KernelParams& p) {
    if (x.size() != y.size())
        throw ParameterError("kernel arguments must have equal dimension");
    return poly_kernel(x.data(), y.data(), x.size(), p);
}

KpcaModel kpca_fit(const Tensor& x, std::size_t n_components, KernelParams params) {
    if (x.shape.size() != 2) throw ParameterError("kpca_fit expects an N x D matrix");
    const std::size_t n = x.shape[0], d = x.shape[1];
    if (n_components < 1 || n_components > n)
        throw ParameterError("n_components must lie in [1, N]");
    if (params.gamma == 0.0) params.gamma = 1.0 / double(d);

    Eigen::MatrixXd k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = poly_kernel(&x.data[i * d], &x.data[j * d], d, params);
            k(i, j) = v;
            k(j, i) = v;
        }

    KpcaModel m;
    m.params = params;
    m.training_points = x;
    m.row_means.resize(n);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m.row_means[i] = k.row(i).mean();
        grand += m.row_means[i];
    }
    m.grand_mean = grand / double(n);

    Eigen::MatrixXd kc(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            kc(i, j) = k(i, j) - m.row_means[i] - m.row_means[j] + m.grand_mean;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kc);
    if (solver.info() != Eigen::Success)
        throw NumericError("kernel matrix eigendecomposition did not converge");

    // Ascending from Eigen; reorder descending with negatives clamped to 0.
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = {std::max(solver.eigenvalues()[static_cast<long>(i)], 0.0), i};
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const double lmax = order.front().first;
    if (lmax <= 0.0)
        throw DataError("degenerate data: centered kernel matrix has no variance");

    std::vector<std::size_t> kept;
    m.total_variance = 0.0;
    for (const auto& [lam, idx] : order) {
        m.total_variance += lam;
        if (lam > 1e-10 * lmax && kept.size() < n_components) kept.push_back(idx);
    }
    if (kept.size() < n_components)
        throw DataError("degenerate data: kernel rank below requested components");

    m.alphas = Tensor({n, n_components});
    m.eigenvalues.resize(n_components);
    for (std::size_t c = 0; c < n_components; ++c) {
        const auto [lam, idx] = order[c];
        m.eigenvalues[c] = lam;
        Eigen::VectorXd v = solver.eigenvectors().col(static_cast<long>(idx)) / std::sqrt(lam);
        // Deterministic sign: the largest-magnitude entry is positive.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v[static_cast<long>(i)]) > std::abs(v[static_cast<long>(arg)])) arg = i;
        if (v[static_cast<long>(arg)] < 0.0) v = -v;
        for (std::size_t i = 0; i < n; ++i) m.alphas.at2(i, c) = v[static_cast<long>(i)];
    }
    return m;
}

std::vector<double> kpca_transform(const KpcaModel& m, const double* x, std::size_t d) {
    if (d != m.input_dim())
        throw ParameterError("kpca_transform dimension mismatch");
    const std::size_t n = m.training_points.shape[0];
    const std::size_t kcomp = m.components();

    std::vector<double> krow(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        krow[i] = poly_kernel(x, &m.training_points.data[i * d], d, m.params);
        mean += krow[i];
    }
    mean /= double(n);
    for (std::size_t i = 0; i < n; ++i)
        krow[i] = krow[i] - m.row_means[i] - mean + m.grand_mean;

    std::vector<double> out(kcomp, 0.0);
    kernels::active().gemv_t_acc(m.alphas.data.data(), n, kcomp, krow.data(), out.data());
    return out;
}

Tensor kpca_transform_all(const KpcaModel& m, const Tensor& x) {
    if (x.shape.size() != 2 || x.shape[1] != m.input_dim())
        throw ParameterError("kpca_transform_all dimension mismatch");
    const std::size_t t = x.shape[0], kcomp = m.components();
    Tensor out({t, kcomp});
    for (std::size_t i = 0; i < t; ++i) {
        const auto row = kpca_transform(m, &x.data[i * x.shape[1]], x.shape[1]);
        std::copy(row.begin(), row.end(), out.data.begin() + i * kcomp);
    }
    return out;
}

std::vector<double> explained_variance(const KpcaModel& m) {
    std::vector<double> out;
    out.reserve(m.eigenvalues.size());
    double acc = 0.0;
    for (double lam : m.eigenvalues) {
        acc += lam / m.total_variance;
        out.push_back(acc);
    }
    return out;
}

void save_kpca(const KpcaModel& m, const std::filesystem::path& json_path) {
    const auto stem = json_path.stem().string();
    const auto dir = json_path.parent_path();
    nlohmann::json j;
    j["format"] = "kpca-model";
    j["kernel_params"] = {{"degree", m.params.degree},
                          {"gamma", m.params.gamma},
                          {"coef0", m.params.coef0}};
    j["n_training"] = m.training_points.shape[0];
    j["input_dim"] = m.training_points.shape[1];
    j["n_components"] = m.components();
    j["eigenvalues"] = m.eigenvalues;
    j["row_means"] = m.row_means;
    j["grand_mean"] = m.grand_mean;
    j["total_variance"] = m.total_variance;
    j["training_points_file"] = stem + ".X.mtns";
    j["alphas_file"] = stem + ".alphas.mtns";
    write_f32(dir / (stem + ".X.mtns"), m.training_points);
    write_f32(dir / (stem + ".alphas.mtns"), m.alphas);
    std::ofstream out(json_path);
    if (!out) throw DataError("cannot write " + json_path.string());
    out << j.dump(2) << "\n";
}

KpcaModel load_kpca(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw DataError("cannot open " + json_path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "kpca-model")
        throw DataError("not a kpca model file: " + json_path.string());

    KpcaModel m;
    m.params.degree = j["kernel_params"]["degree"];
    m.params.gamma = j["kernel_params"]["gamma"];
    m.params.coef0 = j["kernel_params"]["coef0"];
    m.eigenvalues = j["eigenvalues"].get<std::vector<double>>();
    m.row_means = j["row_means"].get<std::vector<double>>();
    m.grand_mean = j["grand_mean"];
    m.total_variance = j["total_variance"];
    const auto dir = json_path.parent_path();
    m.training_points = read_tensor_file(dir / j["training_points_file"].get<std::string>()).to_tensor();
    m.alphas = read_tensor_file(dir / j["alphas_file"].get<std::string>()).to_tensor();
    return m;
}

}  // namespace mmsr
