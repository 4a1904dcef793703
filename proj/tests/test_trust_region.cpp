#include "pcrbeam/trust_region.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace pcrbeam;

TEST(TrustRegion, ConvexWithZeroGradientStaysAtOrigin) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    const auto res = trs_minimize(a, Eigen::VectorXd::Zero(4), 2.0);
    EXPECT_NEAR(res.u.norm(), 0.0, 1e-14);
    EXPECT_NEAR(res.value, 0.0, 1e-14);
    EXPECT_FALSE(res.boundary);
}

TEST(TrustRegion, ConvexInteriorStationaryPoint) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd b(3);
    b << -1.0, 0.0, 0.0;
    const auto res = trs_minimize(a, b, 10.0);
    EXPECT_FALSE(res.boundary);
    EXPECT_NEAR(res.u(0), 0.5, 1e-12);
    EXPECT_NEAR(res.value, -0.25, 1e-12);
    EXPECT_NEAR(res.multiplier, 0.0, 1e-12);
}

TEST(TrustRegion, ConvexBoundarySolution) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd b(2);
    b << -10.0, 0.0;
    const auto res = trs_minimize(a, b, 1.0);
    EXPECT_TRUE(res.boundary);
    EXPECT_NEAR(res.u(0), 1.0, 1e-10);
    EXPECT_NEAR(res.value, -9.0, 1e-9);
    EXPECT_NEAR(res.multiplier, 4.0, 1e-8);
}

TEST(TrustRegion, IndefiniteHardCaseByInspection) {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 0.0, 0.0, -1.0;
    const auto res = trs_minimize(a, Eigen::VectorXd::Zero(2), 1.0);
    EXPECT_TRUE(res.boundary);
    EXPECT_NEAR(res.value, -1.0, 1e-12);
    EXPECT_NEAR(std::abs(res.u(1)), 1.0, 1e-12);
    EXPECT_NEAR(res.u(0), 0.0, 1e-12);
}

TEST(TrustRegion, HardCaseWithGradientOrthogonalToBottomSpace) {
    Eigen::MatrixXd a(2, 2);
    a << -1.0, 0.0, 0.0, 1.0;
    Eigen::VectorXd b(2);
    b << 0.0, 1.0;
    const auto res = trs_minimize(a, b, 1.0);
    // On the unit circle: f = -1 + 2 y^2 + y, minimized at y = -1/4.
    EXPECT_TRUE(res.boundary);
    EXPECT_NEAR(res.value, -1.125, 1e-12);
    EXPECT_NEAR(res.u(1), -0.25, 1e-10);
    EXPECT_NEAR(res.multiplier, 1.0, 1e-10);
}

TEST(TrustRegion, ZeroRadiusPinsOrigin) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 3);
    a = (a + a.transpose()).eval();
    const auto res = trs_minimize(a, Eigen::VectorXd::Ones(3), 0.0);
    EXPECT_EQ(res.u.norm(), 0.0);
    EXPECT_EQ(res.value, 0.0);
}

TEST(TrustRegion, KktResidualOnRandomBoundaryInstances) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 12;
        Eigen::MatrixXd raw(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) raw(i, j) = gauss(rng);
        const Eigen::MatrixXd a = 0.5 * (raw + raw.transpose());
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b(i) = 3.0 * gauss(rng);
        const double radius = 0.5 + std::abs(gauss(rng));

        const auto res = trs_minimize(a, b, radius);
        EXPECT_LE(res.u.norm(), radius * (1.0 + 1e-9));
        // Stationarity: (A + nu I) u = -b/2.
        const Eigen::VectorXd kkt = (a * res.u + res.multiplier * res.u + 0.5 * b);
        EXPECT_LE(kkt.norm(), 1e-7 * (1.0 + b.norm()));
        if (res.boundary) EXPECT_NEAR(res.u.norm(), radius, 1e-7 * radius);
        // A + nu I must be PSD at the reported multiplier.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
        EXPECT_GE(res.multiplier, -es.eigenvalues().minCoeff() - 1e-8 * a.norm());
    }
}

/// Random sampling plus projected-gradient polish; independent of the
/// eigendecomposition path inside trs_minimize.
double sampled_minimum(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double radius,
                       int n_samples, std::mt19937_64& rng) {
    const int n = static_cast<int>(a.rows());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const auto value_of = [&](const Eigen::VectorXd& u) { return u.dot(a * u) + b.dot(u); };

    double best = value_of(Eigen::VectorXd::Zero(n));
    std::vector<Eigen::VectorXd> starts;
    Eigen::VectorXd best_u = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < n_samples; ++s) {
        Eigen::VectorXd u(n);
        for (int i = 0; i < n; ++i) u(i) = gauss(rng);
        u *= radius / u.norm();
        if (s % 2 == 0) u *= std::pow(unif(rng), 1.0 / n);  // interior points too
        const double val = value_of(u);
        if (val < best) {
            best = val;
            best_u = u;
        }
    }
    starts.push_back(best_u);
    for (int s = 0; s < 31; ++s) {
        Eigen::VectorXd u(n);
        for (int i = 0; i < n; ++i) u(i) = gauss(rng);
        starts.push_back(radius / u.norm() * u);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double lipschitz = 2.0 * std::max(std::abs(es.eigenvalues()(0)),
                                            std::abs(es.eigenvalues()(a.rows() - 1))) + 1e-12;
    for (auto& u : starts) {
        for (int it = 0; it < 4000; ++it) {
            const Eigen::VectorXd grad = 2.0 * (a * u) + b;
            u -= grad / lipschitz;
            const double norm = u.norm();
            if (norm > radius) u *= radius / norm;
        }
        best = std::min(best, value_of(u));
    }
    return best;
}

TEST(TrustRegion, MatchesSampledSearchOnSmallInstances) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6;
        Eigen::MatrixXd raw(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) raw(i, j) = gauss(rng);
        const Eigen::MatrixXd a = 0.5 * (raw + raw.transpose());
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b(i) = gauss(rng);
        const double radius = 1.5;

        const auto res = trs_minimize(a, b, radius);
        const double sampled = sampled_minimum(a, b, radius, 20000, rng);
        EXPECT_LE(res.value, sampled + 1e-7 * (1.0 + std::abs(sampled)));
        EXPECT_GE(res.value, sampled - 1e-4 * (1.0 + std::abs(sampled)));
    }
}

}  // namespace
