#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "pcrbeam/array_model.hpp"
#include "pcrbeam/prior_pdf.hpp"
#include "pcrbeam/quad_model.hpp"
#include "pcrbeam/types.hpp"

namespace pcrbeam {

/// Transmit sample covariance: Hermitian PSD with bounded trace.
struct TransmitCovariance {
    Eigen::MatrixXcd w;

    void validate(const RadarScene& scene) const {
        if (w.rows() != scene.n_tx || w.cols() != scene.n_tx)
            throw std::invalid_argument("TransmitCovariance: size mismatch with scene");
        const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
        if ((w - w.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw std::invalid_argument("TransmitCovariance: not Hermitian");
        const double trace = w.trace().real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(w, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8 * std::max(trace, 1e-300))
            throw std::invalid_argument("TransmitCovariance: not positive semidefinite");
        if (trace > scene.power_budget * (1.0 + 1e-8))
            throw std::invalid_argument("TransmitCovariance: trace exceeds power budget");
    }
};

/// Isotropic covariance spreading the full budget evenly.
inline TransmitCovariance isotropic_covariance(const RadarScene& scene) {
    return {Eigen::MatrixXcd::Identity(scene.n_tx, scene.n_tx) *
            (scene.power_budget / scene.n_tx)};
}

/// Scalar blocks of the posterior Fisher information for (theta, alpha).
/// The theta/alpha cross block vanishes for zero-mean reflection priors and
/// is never formed.
struct PfimBlocks {
    double f_theta_obs = 0.0;
    double f_alpha_obs_coeff = 0.0;
    double f_theta_prior = 0.0;
    Eigen::Matrix2d f_alpha_prior = Eigen::Matrix2d::Zero();
};

struct PcrbValue {
    double value = 0.0;  ///< radians^2
};

/// Observation Fisher term for the angle: Riemann sum of
/// (2 L gamma / sigma^2) * tr(Mdot^H Mdot W) against the given density.
inline double fim_obs_theta(const TransmitCovariance& w, const GriddedPdf& pdf,
                            const std::vector<Eigen::MatrixXcd>& gains,
                            const AngleGrid& grid, const RadarScene& scene) {
    if (static_cast<int>(gains.size()) != grid.n_points || pdf.density.size() != grid.n_points)
        throw std::invalid_argument("fim_obs_theta: size mismatch");
    double acc = 0.0;
    for (int k = 0; k < grid.n_points; ++k)
        acc += real_trace_product(gains[static_cast<size_t>(k)], w.w) * pdf.density(k);
    return 2.0 * scene.n_samples * scene.gamma / scene.noise_power * acc * grid.spacing;
}

/// Observation Fisher coefficient for the reflection coefficient (the scalar
/// multiplying I_2). tr(M^H M W) = n_rx * a^H W a for unit-modulus steering.
inline double fim_obs_alpha_coeff(const TransmitCovariance& w, const GriddedPdf& pdf,
                                  const AngleGrid& grid, const RadarScene& scene) {
    if (pdf.density.size() != grid.n_points)
        throw std::invalid_argument("fim_obs_alpha_coeff: size mismatch");
    double acc = 0.0;
    for (int k = 0; k < grid.n_points; ++k) {
        const Eigen::VectorXcd a = steering(grid.points(k), scene).a;
        acc += scene.n_rx * (a.adjoint() * w.w * a)(0).real() * pdf.density(k);
    }
    return 2.0 * scene.n_samples / scene.noise_power * acc * grid.spacing;
}

/// Prior Fisher term for the angle: Riemann sum of (p')^2 / p with the shared
/// difference matrix, density floored before division.
inline double fim_prior_theta(const GriddedPdf& pdf, const AngleGrid& grid) {
    const Eigen::VectorXd p = floored_density(pdf);
    const Eigen::VectorXd dp = difference_matrix(grid) * p;
    return dp.cwiseProduct(dp).cwiseQuotient(p).sum() * grid.spacing;
}

/// Prior Fisher block for a zero-mean CSCG reflection coefficient: each real
/// component is Gaussian with variance alpha_variance/2.
inline Eigen::Matrix2d fim_prior_alpha(const RadarScene& scene) {
    return (2.0 / scene.alpha_variance) * Eigen::Matrix2d::Identity();
}

/// PCRB for the angle; the alpha block never couples in, so only the scalar
/// theta entry of the PFIM is inverted.
inline PcrbValue pcrb_theta(const TransmitCovariance& w, const GriddedPdf& pdf,
                            const std::vector<Eigen::MatrixXcd>& gains,
                            const AngleGrid& grid, const RadarScene& scene) {
    const double denom = fim_obs_theta(w, pdf, gains, grid, scene) + fim_prior_theta(pdf, grid);
    if (!(denom > 0.0))
        throw std::runtime_error("pcrb_theta: zero posterior Fisher information, angle unidentifiable");
    return {1.0 / denom};
}

/// Maximum PCRB over a set of candidate real PDFs, with the attaining index.
inline std::pair<PcrbValue, int> worst_case_pcrb_sampled(const TransmitCovariance& w,
                                                         const std::vector<GriddedPdf>& samples,
                                                         const std::vector<Eigen::MatrixXcd>& gains,
                                                         const AngleGrid& grid,
                                                         const RadarScene& scene) {
    if (samples.empty()) throw std::invalid_argument("worst_case_pcrb_sampled: empty sample set");
    // tr(G_k W) does not depend on the sample; hoist it out of the scan.
    Eigen::VectorXd gw(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k)
        gw(k) = real_trace_product(gains[static_cast<size_t>(k)], w.w);
    const double obs_scale = 2.0 * scene.n_samples * scene.gamma / scene.noise_power * grid.spacing;

    double worst = -std::numeric_limits<double>::infinity();
    int worst_index = 0;
    for (size_t m = 0; m < samples.size(); ++m) {
        const double fobs = obs_scale * gw.dot(samples[m].density);
        const double fprior = fim_prior_theta(samples[m], grid);
        const double pcrb = 1.0 / (fobs + fprior);
        if (pcrb > worst) {
            worst = pcrb;
            worst_index = static_cast<int>(m);
        }
    }
    return {PcrbValue{worst}, worst_index};
}

}  // namespace pcrbeam
