#include "pcrbeam/quad_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "pcrbeam/fisher_pcrb.hpp"

namespace {

using namespace pcrbeam;

RadarScene reference_scene() {
    RadarScene scene;
    scene.n_tx = 10;
    scene.n_rx = 12;
    scene.power_budget = dbm_to_watts(30.0);
    scene.noise_power = dbm_to_watts(-90.0);
    scene.n_samples = 25;
    scene.gamma = 2e-14;
    scene.alpha_variance = 2e-14;
    return scene;
}

GaussianMixture reference_mixture() {
    GaussianMixture mix;
    mix.weights = Eigen::Vector2d(0.6, 0.4);
    mix.means = Eigen::Vector2d(-0.7, 0.7);
    mix.variances = Eigen::Vector2d(1e-3, std::pow(10.0, -2.8));
    return mix;
}

QuadraticPcrbModel reference_model(int n_grid, double delta) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(n_grid);
    const GriddedPdf p_bar = discretize_mixture(reference_mixture(), grid);
    return build_quadratic_model(p_bar, grid, gain_matrices(grid, scene), scene, delta);
}

TEST(DifferenceMatrix, AnnihilatesConstantsInInterior) {
    const AngleGrid grid = make_angle_grid(32);
    const Eigen::MatrixXd d = difference_matrix(grid);
    const Eigen::VectorXd out = d * Eigen::VectorXd::Constant(32, 4.2);
    EXPECT_NEAR(out.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(DifferenceMatrix, ExactOnLinearFunctions) {
    const AngleGrid grid = make_angle_grid(64);
    const Eigen::MatrixXd d = difference_matrix(grid);
    const Eigen::VectorXd out = d * grid.points;
    EXPECT_NEAR((out - Eigen::VectorXd::Ones(64)).cwiseAbs().maxCoeff(), 0.0, 1e-8);
}

TEST(DifferenceMatrix, SecondOrderAccurateOnSine) {
    const AngleGrid grid = make_angle_grid_from_spacing(0.005);
    const Eigen::MatrixXd d = difference_matrix(grid);
    const Eigen::VectorXd dv = d * grid.points.array().sin().matrix();
    double worst = 0.0;
    for (int k = 1; k + 1 < grid.n_points; ++k)
        worst = std::max(worst, std::abs(dv(k) - std::cos(grid.points(k))));
    EXPECT_LE(worst, 1e-4);
}

TEST(DifferenceMatrix, RejectsTooCoarseGrids) {
    EXPECT_THROW(difference_matrix(make_angle_grid(2)), std::invalid_argument);
}

TEST(NullspaceBasis, TwoPointCase) {
    const Eigen::MatrixXd b = nullspace_basis(2);
    ASSERT_EQ(b.rows(), 2);
    ASSERT_EQ(b.cols(), 1);
    EXPECT_NEAR(b(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(b(1, 0), -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(NullspaceBasis, OrthonormalZeroSumColumns) {
    for (int n : {3, 17, 128}) {
        const Eigen::MatrixXd b = nullspace_basis(n);
        EXPECT_LE((Eigen::RowVectorXd::Ones(n) * b).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((b.transpose() * b - Eigen::MatrixXd::Identity(n - 1, n - 1)).norm(), 1e-10);
    }
}

TEST(NullspaceBasis, ProjectionRoundTripOnZeroSumVectors) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 40;
    const Eigen::MatrixXd b = nullspace_basis(n);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd e(n);
        for (int i = 0; i < n; ++i) e(i) = gauss(rng);
        e.array() -= e.mean();
        EXPECT_LE((b * (b.transpose() * e) - e).norm(), 1e-10 * e.norm());
    }
}

TEST(QuadModel, UniformDensityKillsLinearAndConstantTerms) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(64);
    GriddedPdf uniform;
    uniform.density = Eigen::VectorXd::Constant(64, 1.0 / kPi);
    const auto model =
        build_quadratic_model(uniform, grid, gain_matrices(grid, scene), scene, 1.0);
    EXPECT_NEAR(model.c_p, 0.0, 1e-10);
    EXPECT_NEAR(model.f_p.cwiseAbs().maxCoeff(), 0.0, 1e-10);
    const Eigen::MatrixXd d = difference_matrix(grid);
    const Eigen::MatrixXd expected = kPi * grid.spacing * d.transpose() * d;
    EXPECT_LE((model.q_p - expected).norm(), 1e-9 * expected.norm());
}

TEST(QuadModel, ConstantTermEqualsPriorFisher) {
    const auto model = reference_model(128, 1.0);
    EXPECT_NEAR(model.c_p, fim_prior_theta(model.p_bar, model.grid),
                1e-10 * std::max(1.0, model.c_p));
    EXPECT_NEAR(prior_fisher_quadratic(model, Eigen::VectorXd::Zero(128)), model.c_p, 1e-12);
}

TEST(QuadModel, QpIsSymmetric) {
    const auto model = reference_model(96, 1.0);
    EXPECT_LE((model.q_p - model.q_p.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

/// Zero-sum directions supported where the density is healthy; raw white
/// noise would park perturbation mass on floored tail cells and leave the
/// Taylor regime immediately.
Eigen::VectorXd weighted_zero_sum_direction(const GriddedPdf& p_bar, const AngleGrid& grid,
                                            std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd d(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) d(k) = gauss(rng) * p_bar.density(k);
    const double mass = p_bar.density.sum();
    d -= (d.sum() / mass) * p_bar.density;
    return d / d.norm();
}

TEST(QuadModel, CubicRemainderScaling) {
    const auto model = reference_model(128, 1.0);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd dir = weighted_zero_sum_direction(model.p_bar, model.grid, rng);
        double prev_err = -1.0;
        for (const double t : {1e-2, 5e-3, 2.5e-3}) {
            GriddedPdf perturbed;
            perturbed.density = model.p_bar.density + t * dir;
            const double exact = fim_prior_theta(perturbed, model.grid);
            const double quad = prior_fisher_quadratic(model, t * dir);
            const double err = std::abs(quad - exact);
            // Directions with a small cubic constant bottom out at the
            // double-precision resolution of the two evaluations; below that
            // the ratio is measurement noise, not model error.
            const double noise_floor = 1e-12 * std::max(1.0, exact);
            if (prev_err >= 0.0 && err > noise_floor)
                EXPECT_GE(prev_err, 7.0 * err) << "trial " << trial;
            prev_err = err;
        }
    }
}

TEST(QuadModel, ConstraintValueIdenticalInBothParameterizations) {
    const auto model = reference_model(64, 1.3);
    const RadarScene scene = reference_scene();
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::MatrixXcd w = isotropic_covariance(scene).w;
    const Eigen::VectorXd g = g_vector(model, w);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd u(63);
        for (int i = 0; i < 63; ++i) u(i) = gauss(rng);
        u *= model.ball_radius / u.norm() * 0.9;
        const Eigen::VectorXd e = model.basis * u;

        const double lhs = e.dot(model.q_p * e) + (model.f_p + g).dot(e) + model.c_p +
                           model.p_bar.density.dot(g);
        const double rhs = u.dot(model.basis_q_basis * u) +
                           (model.basis.transpose() * (model.f_p + g)).dot(u) + model.c_p +
                           model.p_bar.density.dot(g);
        EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
        // Ball membership maps across the substitution.
        EXPECT_NEAR(error_integral(e, model.grid), 0.0, 1e-9);
        EXPECT_NEAR(e.squaredNorm(), u.squaredNorm(), 1e-10 * u.squaredNorm());
    }
}

TEST(QuadModel, GVectorLinearInCovariance) {
    const auto model = reference_model(48, 1.0);
    const RadarScene scene = reference_scene();
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd raw(scene.n_tx, scene.n_tx);
    for (int i = 0; i < scene.n_tx; ++i)
        for (int j = 0; j < scene.n_tx; ++j) raw(i, j) = Complex(gauss(rng), gauss(rng));
    const Eigen::MatrixXcd w1 = raw * raw.adjoint();
    const Eigen::MatrixXcd w2 = Eigen::MatrixXcd::Identity(scene.n_tx, scene.n_tx);

    EXPECT_NEAR(g_vector(model, Eigen::MatrixXcd::Zero(scene.n_tx, scene.n_tx)).cwiseAbs().maxCoeff(),
                0.0, 1e-15);
    const Eigen::VectorXd combo = g_vector(model, 2.0 * w1 + 0.5 * w2);
    const Eigen::VectorXd split = 2.0 * g_vector(model, w1) + 0.5 * g_vector(model, w2);
    EXPECT_LE((combo - split).cwiseAbs().maxCoeff(), 1e-12 * combo.cwiseAbs().maxCoeff());
    EXPECT_GE(g_vector(model, w1).minCoeff(), 0.0);
}

}  // namespace
