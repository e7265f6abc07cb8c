#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mmsr/errors.hpp"
#include "mmsr/kpca.hpp"
#include "mmsr/rng.hpp"

using namespace mmsr;

namespace {

// Cyclic Jacobi eigensolver for small symmetric matrices; completely
// independent of the library's eigendecomposition.
void jacobi_eig(std::vector<std::vector<double>> a, std::vector<double>& vals,
                std::vector<std::vector<double>>& vecs) {
    const std::size_t n = a.size();
    vecs.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) vecs[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-18) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vecs[k][p], vkq = vecs[k][q];
                    vecs[k][p] = c * vkp - s * vkq;
                    vecs[k][q] = s * vkp + c * vkq;
                }
            }
    }
    vals.resize(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = a[i][i];
}

// Projections of the training points computed entirely by hand: explicit
// kernel matrix, double centering, Jacobi eigensolve, 1/sqrt(lambda) scaling.
std::vector<std::vector<double>> oracle_projections(const Tensor& x, std::size_t k,
                                                    const KernelParams& p) {
    const std::size_t n = x.shape[0], d = x.shape[1];
    const double gamma = p.gamma != 0.0 ? p.gamma : 1.0 / double(d);
    std::vector<std::vector<double>> km(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t e = 0; e < d; ++e) dot += x.at2(i, e) * x.at2(j, e);
            km[i][j] = std::pow(gamma * dot + p.coef0, p.degree);
        }
    // K' = K - 1K - K1 + 1K1
    std::vector<double> rm(n, 0.0);
    double gm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            rm[i] += km[i][j] / double(n);
            gm += km[i][j] / double(n * n);
        }
    std::vector<std::vector<double>> kc(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) kc[i][j] = km[i][j] - rm[i] - rm[j] + gm;

    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    jacobi_eig(kc, vals, vecs);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

    std::vector<std::vector<double>> proj(n, std::vector<double>(k));
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t e = order[c];
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += kc[i][j] * vecs[j][e] / std::sqrt(vals[e]);
            proj[i][c] = s;
        }
    }
    return proj;
}

Tensor random_points(Rng& rng, std::size_t n, std::size_t d) {
    Tensor x({n, d});
    for (double& v : x.data) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("polynomial kernel values") {
    const std::vector<double> zero = {0.0, 0.0};
    CHECK(poly_kernel(zero, zero, {3, 0.5, 1.0}) == 1.0);

    KernelParams p{3, 1.0, 1.0};
    CHECK(poly_kernel({1.0}, {2.0}, p) == 27.0);  // (1*2 + 1)^3

    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
        const Tensor pts = random_points(rng, 2, 4);
        KernelParams q;  // gamma resolves to 1/D inside fit, pass explicit here
        q.gamma = 0.25;
        const double a = poly_kernel(pts.data.data(), pts.data.data() + 4, 4, q);
        const double b = poly_kernel(pts.data.data() + 4, pts.data.data(), 4, q);
        CHECK(a == doctest::Approx(b));
    }

    CHECK_THROWS_AS(poly_kernel({1.0}, {1.0, 2.0}, KernelParams{}), ParameterError);
}

TEST_CASE("fit and transform match the hand oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 3 + std::size_t(rng.below(8));  // up to 10
        const std::size_t d = 1 + std::size_t(rng.below(4));
        const std::size_t k = std::min<std::size_t>(2, n - 1);
        const Tensor x = random_points(rng, n, d);

        const KpcaModel m = kpca_fit(x, k);
        const auto oracle = oracle_projections(x, k, m.params);
        const Tensor mine = kpca_transform_all(m, x);

        REQUIRE(mine.shape == std::vector<std::size_t>{n, k});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c)
                CHECK(std::abs(mine.at2(i, c)) ==
                      doctest::Approx(std::abs(oracle[i][c])).epsilon(1e-8));
    }
}

TEST_CASE("transform of training points is self-consistent and order-stable") {
    Rng rng(8);
    const Tensor x = random_points(rng, 7, 3);
    const KpcaModel m = kpca_fit(x, 3);

    // per-point transform equals the batch transform
    const Tensor all = kpca_transform_all(m, x);
    for (std::size_t i = 0; i < 7; ++i) {
        const auto one = kpca_transform(m, &x.data[i * 3], 3);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(one[c] == doctest::Approx(all.at2(i, c)).epsilon(1e-10));
    }

    // permuting the training set leaves projections unchanged (sign convention)
    Tensor perm({7, 3});
    const std::size_t order[] = {3, 0, 6, 1, 5, 2, 4};
    for (std::size_t i = 0; i < 7; ++i)
        std::copy_n(&x.data[order[i] * 3], 3, &perm.data[i * 3]);
    const KpcaModel m2 = kpca_fit(perm, 3);
    for (std::size_t i = 0; i < 7; ++i) {
        const auto a = kpca_transform(m, &x.data[i * 3], 3);
        const auto b = kpca_transform(m2, &x.data[i * 3], 3);
        for (std::size_t c = 0; c < 3; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-6));
    }
}

TEST_CASE("D=1 Gram route equals the explicit degree-3 feature map") {
    // (xy + 1)^3 corresponds to phi(x) = [1, sqrt3 x, sqrt3 x^2, x^3]
    Rng rng(12);
    Tensor x({6, 1});
    for (double& v : x.data) v = rng.uniform(-1.5, 1.5);

    KernelParams p;
    p.gamma = 1.0;
    const KpcaModel m = kpca_fit(x, 2, p);
    const Tensor mine = kpca_transform_all(m, x);

    // PCA in feature space: center phi, project onto covariance eigenvectors.
    const double s3 = std::sqrt(3.0);
    std::vector<std::vector<double>> phi(6, std::vector<double>(4));
    for (std::size_t i = 0; i < 6; ++i) {
        const double v = x.data[i];
        phi[i] = {1.0, s3 * v, s3 * v * v, v * v * v};
    }
    std::vector<double> mean(4, 0.0);
    for (const auto& f : phi)
        for (std::size_t d = 0; d < 4; ++d) mean[d] += f[d] / 6.0;
    std::vector<std::vector<double>> scatter(4, std::vector<double>(4, 0.0));
    for (const auto& f : phi)
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b)
                scatter[a][b] += (f[a] - mean[a]) * (f[b] - mean[b]);
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    jacobi_eig(scatter, vals, vecs);
    std::vector<std::size_t> order = {0, 1, 2, 3};
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

    for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t e = order[c];
        for (std::size_t i = 0; i < 6; ++i) {
            double proj = 0.0;
            for (std::size_t d = 0; d < 4; ++d) proj += (phi[i][d] - mean[d]) * vecs[d][e];
            CHECK(std::abs(mine.at2(i, c)) == doctest::Approx(std::abs(proj)).epsilon(1e-6));
        }
    }
}

TEST_CASE("explained variance") {
    Rng rng(77);
    const Tensor x = random_points(rng, 9, 4);
    const KpcaModel m = kpca_fit(x, 4);
    const auto cum = explained_variance(m);
    REQUIRE(cum.size() == 4);
    for (std::size_t i = 1; i < cum.size(); ++i) CHECK(cum[i] >= cum[i - 1]);
    CHECK(cum.back() <= 1.0 + 1e-12);
    CHECK(cum.front() > 0.0);
}

TEST_CASE("degenerate and invalid inputs") {
    Tensor same({4, 2});
    for (std::size_t i = 0; i < 4; ++i) {
        same.at2(i, 0) = 1.0;
        same.at2(i, 1) = -2.0;
    }
    CHECK_THROWS_AS(kpca_fit(same, 2), DataError);

    Rng rng(1);
    const Tensor x = random_points(rng, 3, 2);
    CHECK_THROWS_AS(kpca_fit(x, 5), ParameterError);
    const KpcaModel m = kpca_fit(x, 2);
    CHECK_THROWS_AS(kpca_transform(m, x.data.data(), 3), ParameterError);
}

TEST_CASE("save and load round-trip") {
    Rng rng(21);
    const Tensor x = random_points(rng, 8, 3);
    const Tensor probe = random_points(rng, 4, 3);
    const KpcaModel m = kpca_fit(x, 3);

    const auto path = std::filesystem::temp_directory_path() / "kpca_rt.json";
    save_kpca(m, path);
    const KpcaModel back = load_kpca(path);

    const Tensor a = kpca_transform_all(m, probe);
    const Tensor b = kpca_transform_all(back, probe);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-4));
    std::filesystem::remove(path);
    std::filesystem::remove(path.parent_path() / "kpca_rt.X.mtns");
    std::filesystem::remove(path.parent_path() / "kpca_rt.alphas.mtns");
}
