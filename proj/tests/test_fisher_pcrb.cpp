#include "pcrbeam/fisher_pcrb.hpp"

#include <gtest/gtest.h>

#include <random>

#include "pcrbeam/array_model.hpp"

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

Eigen::MatrixXcd random_psd(int n, std::mt19937_64& rng, double trace_target) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd raw(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) raw(i, j) = Complex(gauss(rng), gauss(rng));
    Eigen::MatrixXcd w = raw * raw.adjoint();
    return w * (trace_target / w.trace().real());
}

TEST(TransmitCovariance, ValidatesShapeHermitianPsdTrace) {
    const RadarScene scene = reference_scene();
    EXPECT_NO_THROW(isotropic_covariance(scene).validate(scene));

    TransmitCovariance bad_trace;
    bad_trace.w = Eigen::MatrixXcd::Identity(10, 10) * (scene.power_budget / 5.0);
    EXPECT_THROW(bad_trace.validate(scene), std::invalid_argument);

    TransmitCovariance not_hermitian;
    not_hermitian.w = Eigen::MatrixXcd::Identity(10, 10) * (scene.power_budget / 10.0);
    not_hermitian.w(0, 1) = Complex(0.1, 0.0);
    EXPECT_THROW(not_hermitian.validate(scene), std::invalid_argument);

    TransmitCovariance indefinite;
    indefinite.w = Eigen::MatrixXcd::Identity(10, 10) * (scene.power_budget / 20.0);
    indefinite.w(0, 0) = -0.01;
    EXPECT_THROW(indefinite.validate(scene), std::invalid_argument);
}

TEST(FimObsTheta, ZeroCovarianceGivesZero) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(64);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    TransmitCovariance zero;
    zero.w = Eigen::MatrixXcd::Zero(10, 10);
    EXPECT_EQ(fim_obs_theta(zero, pdf, gains, grid, scene), 0.0);
}

TEST(FimObsTheta, SingleAntennaDegenerateCase) {
    RadarScene scene = reference_scene();
    scene.n_tx = 1;
    scene.n_rx = 1;
    const AngleGrid grid = make_angle_grid(32);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    EXPECT_NEAR(fim_obs_theta(isotropic_covariance(scene), pdf, gains, grid, scene), 0.0, 1e-12);
}

TEST(FimObsTheta, MatchesRefinedQuadrature) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(628);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    const TransmitCovariance w = isotropic_covariance(scene);
    const double coarse = fim_obs_theta(w, pdf, gains, grid, scene);

    const AngleGrid fine = make_angle_grid(6280);
    const GriddedPdf pdf_fine = discretize_mixture(reference_mixture(), fine);
    const double refined =
        fim_obs_theta(w, pdf_fine, gain_matrices(fine, scene), fine, scene);
    EXPECT_NEAR(coarse, refined, 1e-3 * refined);
}

TEST(FimObsTheta, LinearInCovariance) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(64);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    std::mt19937_64 rng(17);
    const TransmitCovariance w1{random_psd(10, rng, 0.4)};
    const TransmitCovariance w2{random_psd(10, rng, 0.6)};
    const TransmitCovariance sum{w1.w + w2.w};
    const double lhs = fim_obs_theta(sum, pdf, gains, grid, scene);
    const double rhs = fim_obs_theta(w1, pdf, gains, grid, scene) +
                       fim_obs_theta(w2, pdf, gains, grid, scene);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs));
}

TEST(FimObsAlpha, IsotropicCovarianceClosedForm) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(64);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const double expected =
        2.0 * scene.n_samples / scene.noise_power * scene.n_rx * scene.power_budget;
    EXPECT_NEAR(fim_obs_alpha_coeff(isotropic_covariance(scene), pdf, grid, scene), expected,
                1e-9 * expected);

    TransmitCovariance zero;
    zero.w = Eigen::MatrixXcd::Zero(10, 10);
    EXPECT_EQ(fim_obs_alpha_coeff(zero, pdf, grid, scene), 0.0);
}

TEST(FimObsAlpha, GeneralCovarianceMatchesRefinedQuadrature) {
    const RadarScene scene = reference_scene();
    std::mt19937_64 rng(23);
    const TransmitCovariance w{random_psd(10, rng, scene.power_budget)};

    const AngleGrid grid = make_angle_grid(628);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const double coarse = fim_obs_alpha_coeff(w, pdf, grid, scene);

    const AngleGrid fine = make_angle_grid(6280);
    const GriddedPdf pdf_fine = discretize_mixture(reference_mixture(), fine);
    const double refined = fim_obs_alpha_coeff(w, pdf_fine, fine, scene);
    EXPECT_NEAR(coarse, refined, 1e-3 * refined);
}

TEST(FimPriorTheta, SingleGaussianMatchesClosedForm) {
    // Fisher information of a N(0, 1e-3) prior is 1/variance = 1000;
    // truncation to the angle domain is negligible at this width.
    const AngleGrid grid = make_angle_grid(1024);
    GaussianMixture mix;
    mix.weights = Eigen::VectorXd::Ones(1);
    mix.means = Eigen::VectorXd::Zero(1);
    mix.variances = Eigen::VectorXd::Constant(1, 1e-3);
    const GriddedPdf pdf = discretize_mixture(mix, grid);
    EXPECT_NEAR(fim_prior_theta(pdf, grid), 1000.0, 10.0);
}

TEST(FimPriorTheta, MixtureMatchesRefinedQuadrature) {
    const AngleGrid grid = make_angle_grid(628);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const double coarse = fim_prior_theta(pdf, grid);

    const AngleGrid fine = make_angle_grid(6280);
    const GriddedPdf pdf_fine = discretize_mixture(reference_mixture(), fine);
    const double refined = fim_prior_theta(pdf_fine, fine);
    // Well-separated components: 0.6/1e-3 + 0.4/10^-2.8 ~ 852.4.
    EXPECT_NEAR(refined, 852.4, 0.02 * 852.4);
    EXPECT_NEAR(coarse, refined, 0.02 * refined);
}

TEST(FimPriorTheta, FlatDensityCarriesNoInformation) {
    const AngleGrid grid = make_angle_grid(512);
    GaussianMixture mix;
    mix.weights = Eigen::VectorXd::Ones(1);
    mix.means = Eigen::VectorXd::Zero(1);
    mix.variances = Eigen::VectorXd::Constant(1, 1e6);
    const GriddedPdf pdf = discretize_mixture(mix, grid);
    EXPECT_LE(fim_prior_theta(pdf, grid), 1e-2);
}

TEST(FimPriorTheta, RefinementConsistencyForMixture) {
    const AngleGrid coarse = make_angle_grid_from_spacing(0.005);
    const AngleGrid fine = make_angle_grid(2 * coarse.n_points);
    const double a = fim_prior_theta(discretize_mixture(reference_mixture(), coarse), coarse);
    const double b = fim_prior_theta(discretize_mixture(reference_mixture(), fine), fine);
    EXPECT_LE(std::abs(a - b), 0.005 * b);
}

TEST(FimPriorAlpha, ClosedFormCscg) {
    RadarScene scene = reference_scene();
    scene.alpha_variance = 2e-14;
    Eigen::Matrix2d f = fim_prior_alpha(scene);
    EXPECT_NEAR(f(0, 0), 1e14, 1.0);
    EXPECT_NEAR(f(1, 1), 1e14, 1.0);
    EXPECT_EQ(f(0, 1), 0.0);

    scene.alpha_variance = 2.0;
    EXPECT_TRUE(fim_prior_alpha(scene).isApprox(Eigen::Matrix2d::Identity()));
}

TEST(PcrbTheta, PriorOnlyAndMonotonicity) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(628);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);

    TransmitCovariance zero;
    zero.w = Eigen::MatrixXcd::Zero(10, 10);
    const double prior_only = pcrb_theta(zero, pdf, gains, grid, scene).value;
    EXPECT_NEAR(prior_only, 1.0 / 852.4, 0.02 / 852.4);

    const TransmitCovariance iso = isotropic_covariance(scene);
    const double with_obs = pcrb_theta(iso, pdf, gains, grid, scene).value;
    EXPECT_LT(with_obs, prior_only);
    EXPECT_LE(with_obs, 1.0 / fim_prior_theta(pdf, grid));

    TransmitCovariance doubled;
    doubled.w = 2.0 * iso.w;
    const double f1 = fim_obs_theta(iso, pdf, gains, grid, scene);
    const double f2 = fim_obs_theta(doubled, pdf, gains, grid, scene);
    EXPECT_NEAR(f2, 2.0 * f1, 1e-10 * f2);
}

TEST(PcrbTheta, MonotoneUnderPsdIncrements) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(96);
    const GriddedPdf pdf = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    std::mt19937_64 rng(31);
    const TransmitCovariance w{random_psd(10, rng, 0.5)};
    const TransmitCovariance w_plus{w.w + random_psd(10, rng, 0.3)};
    EXPECT_LE(pcrb_theta(w_plus, pdf, gains, grid, scene).value,
              pcrb_theta(w, pdf, gains, grid, scene).value * (1.0 + 1e-12));
}

TEST(WorstCaseSampled, SingleSampleAndOrdering) {
    const RadarScene scene = reference_scene();
    const AngleGrid grid = make_angle_grid(128);
    const GriddedPdf p_bar = discretize_mixture(reference_mixture(), grid);
    const auto gains = gain_matrices(grid, scene);
    const TransmitCovariance w = isotropic_covariance(scene);

    const auto [single, idx_single] = worst_case_pcrb_sampled(w, {p_bar}, gains, grid, scene);
    EXPECT_EQ(idx_single, 0);
    EXPECT_NEAR(single.value, pcrb_theta(w, p_bar, gains, grid, scene).value, 1e-15);

    // A flatter density is strictly less informative than the nominal one.
    GaussianMixture flat;
    flat.weights = Eigen::VectorXd::Ones(1);
    flat.means = Eigen::VectorXd::Zero(1);
    flat.variances = Eigen::VectorXd::Constant(1, 10.0);
    const GriddedPdf less_informative = discretize_mixture(flat, grid);
    const auto [worst, idx] =
        worst_case_pcrb_sampled(w, {p_bar, less_informative}, gains, grid, scene);
    EXPECT_EQ(idx, 1);
    EXPECT_GT(worst.value, single.value);
}

/// Monte-Carlo check that the theta/alpha cross block of the observation
/// Fisher matrix vanishes for a zero-mean reflection prior. The score
/// functions are formed directly from the Gaussian likelihood on a tiny
/// scene; the implementation itself never builds this block.
TEST(PfimStructure, ThetaAlphaCrossBlockVanishes) {
    RadarScene scene;
    scene.n_tx = 2;
    scene.n_rx = 2;
    scene.power_budget = 1.0;
    scene.noise_power = 0.5;
    scene.n_samples = 4;
    scene.gamma = 1.0;
    scene.alpha_variance = 1.0;

    std::mt19937_64 rng(97);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int trials = 20000;

    // Fixed probing waveforms with the sample covariance held by construction.
    std::vector<Eigen::VectorXcd> x(static_cast<size_t>(scene.n_samples));
    for (auto& xl : x) {
        xl.resize(scene.n_tx);
        for (int i = 0; i < scene.n_tx; ++i) xl(i) = Complex(gauss(rng), gauss(rng));
        xl *= std::sqrt(scene.power_budget / scene.n_samples) / xl.norm();
    }

    double acc_r = 0.0, acc_i = 0.0, acc_r_sq = 0.0, acc_i_sq = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const double theta = std::atan(gauss(rng));  // any interior prior works here
        const Complex alpha =
            std::sqrt(scene.alpha_variance / 2.0) * Complex(gauss(rng), gauss(rng));
        const Eigen::MatrixXcd mm = m_matrix(theta, scene);
        const Eigen::MatrixXcd md = m_dot_matrix(theta, scene);

        double score_theta = 0.0, score_ar = 0.0, score_ai = 0.0;
        for (const auto& xl : x) {
            Eigen::VectorXcd noise(scene.n_rx);
            for (int i = 0; i < scene.n_rx; ++i)
                noise(i) = std::sqrt(scene.noise_power / 2.0) * Complex(gauss(rng), gauss(rng));
            // score of the Gaussian likelihood at the true parameters
            const Eigen::VectorXcd resid = noise;
            score_theta += 2.0 / scene.noise_power * (resid.adjoint() * (alpha * md * xl))(0).real();
            score_ar += 2.0 / scene.noise_power * (resid.adjoint() * (mm * xl))(0).real();
            score_ai += 2.0 / scene.noise_power * (resid.adjoint() * (Complex(0, 1) * mm * xl))(0).real();
        }
        acc_r += score_theta * score_ar;
        acc_i += score_theta * score_ai;
        acc_r_sq += score_theta * score_ar * score_theta * score_ar;
        acc_i_sq += score_theta * score_ai * score_theta * score_ai;
    }
    const double mean_r = acc_r / trials;
    const double mean_i = acc_i / trials;
    const double se_r = std::sqrt((acc_r_sq / trials - mean_r * mean_r) / trials);
    const double se_i = std::sqrt((acc_i_sq / trials - mean_i * mean_i) / trials);
    EXPECT_LE(std::abs(mean_r), 3.0 * se_r);
    EXPECT_LE(std::abs(mean_i), 3.0 * se_i);
}

TEST(PcrbTheta, ThrowsWhenUnidentifiable) {
    RadarScene scene = reference_scene();
    scene.n_tx = 1;
    scene.n_rx = 1;
    const AngleGrid grid = make_angle_grid(32);
    GriddedPdf uniform;
    uniform.density = Eigen::VectorXd::Constant(32, 1.0 / kPi);
    const auto gains = gain_matrices(grid, scene);
    TransmitCovariance zero;
    zero.w = Eigen::MatrixXcd::Zero(1, 1);
    EXPECT_THROW(pcrb_theta(zero, uniform, gains, grid, scene), std::runtime_error);
}

}  // namespace
