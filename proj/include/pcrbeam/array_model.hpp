#pragma once

#include <vector>

#include "pcrbeam/prior_pdf.hpp"
#include "pcrbeam/types.hpp"

namespace pcrbeam {

/// Transmit/receive steering vectors of the half-wavelength ULA pair.
struct SteeringPair {
    Eigen::VectorXcd a;  ///< transmit, length n_tx
    Eigen::VectorXcd b;  ///< receive, length n_rx
};

namespace detail {

/// Element phase coefficients (n - 2p + 1) for p = 1..n; symmetric around zero.
inline Eigen::VectorXd ula_phase_coeffs(int n) {
    Eigen::VectorXd c(n);
    for (int p = 1; p <= n; ++p) c(p - 1) = static_cast<double>(n - 2 * p + 1);
    return c;
}

inline void check_angle(double theta) {
    if (!(theta >= -kPi / 2.0 && theta < kPi / 2.0))
        throw std::domain_error("angle must lie in [-pi/2, pi/2)");
}

}  // namespace detail

/// Steering vectors at angle theta; element p of the transmit vector is
/// exp(-j*pi*(n_tx - 2p + 1)*sin(theta)/2) and the receive side follows the
/// same law with n_rx.
inline SteeringPair steering(double theta, const RadarScene& scene) {
    detail::check_angle(theta);
    const double s = std::sin(theta);
    SteeringPair out;
    out.a = (Complex(0, -kPi / 2.0) * s * detail::ula_phase_coeffs(scene.n_tx)).array().exp();
    out.b = (Complex(0, -kPi / 2.0) * s * detail::ula_phase_coeffs(scene.n_rx)).array().exp();
    return out;
}

/// Rank-one target reflection matrix b(theta) a^H(theta).
inline Eigen::MatrixXcd m_matrix(double theta, const RadarScene& scene) {
    const SteeringPair sv = steering(theta, scene);
    return sv.b * sv.a.adjoint();
}

/// Analytic angle derivative of m_matrix: db a^H + b da^H, with each steering
/// derivative obtained by the chain rule on the element phase laws.
inline Eigen::MatrixXcd m_dot_matrix(double theta, const RadarScene& scene) {
    detail::check_angle(theta);
    const SteeringPair sv = steering(theta, scene);
    const double c = std::cos(theta);
    const Eigen::VectorXcd da =
        (Complex(0, -kPi / 2.0) * c * detail::ula_phase_coeffs(scene.n_tx)).cwiseProduct(sv.a);
    const Eigen::VectorXcd db =
        (Complex(0, -kPi / 2.0) * c * detail::ula_phase_coeffs(scene.n_rx)).cwiseProduct(sv.b);
    return db * sv.a.adjoint() + sv.b * da.adjoint();
}

/// Per-angle Fisher gain matrices Mdot^H(theta_k) Mdot(theta_k), one Hermitian
/// PSD n_tx x n_tx matrix per grid point.
inline std::vector<Eigen::MatrixXcd> gain_matrices(const AngleGrid& grid, const RadarScene& scene) {
    if (grid.n_points < 1) throw std::invalid_argument("gain_matrices: empty grid");
    std::vector<Eigen::MatrixXcd> gains(static_cast<size_t>(grid.n_points));
    for (int k = 0; k < grid.n_points; ++k) {
        const Eigen::MatrixXcd md = m_dot_matrix(grid.points(k), scene);
        Eigen::MatrixXcd g = md.adjoint() * md;
        gains[static_cast<size_t>(k)] = 0.5 * (g + g.adjoint().eval());
    }
    return gains;
}

}  // namespace pcrbeam
