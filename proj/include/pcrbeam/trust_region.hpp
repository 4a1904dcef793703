#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pcrbeam {

/// Exact minimizer of u^T A u + b^T u over the ball ||u|| <= radius.
struct TrsResult {
    Eigen::VectorXd u;
    double value = 0.0;       ///< quadratic value at u
    double multiplier = 0.0;  ///< KKT multiplier nu >= 0, (A + nu I) u = -b/2
    bool boundary = false;    ///< whether the ball constraint is active
};

/// Trust-region subproblem in the eigenbasis of the quadratic: minimizes
/// sum_i lam_i z_i^2 + c_i z_i over ||z|| <= radius, with lam ascending.
/// Safeguarded Newton on the secular equation 1/radius = 1/||z(nu)||,
/// including the hard case where c is orthogonal to the bottom eigenspace
/// of an indefinite quadratic. Exact to rounding, which is the point of
/// using it as an oracle.
inline TrsResult trs_minimize_spectral(const Eigen::VectorXd& lam, const Eigen::VectorXd& c,
                                       double radius) {
    const Eigen::Index n = lam.size();
    if (c.size() != n) throw std::invalid_argument("trs_minimize_spectral: dimension mismatch");
    if (radius < 0.0) throw std::invalid_argument("trs_minimize_spectral: radius must be >= 0");

    TrsResult res;
    if (radius == 0.0 || n == 0) {
        res.u = Eigen::VectorXd::Zero(n);
        res.boundary = true;
        return res;
    }

    const double lam_min = lam(0);
    const double nu_floor = std::max(0.0, -lam_min);

    // Guarded z(nu): exact zeros in c contribute nothing even on zero
    // curvature; everything else may overflow to inf, which the bisection
    // treats as "outside the ball".
    const auto z_entry = [&](Eigen::Index i, double nu) {
        if (c(i) == 0.0) return 0.0;
        return -0.5 * c(i) / (lam(i) + nu);
    };
    const auto z_of = [&](double nu) {
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = z_entry(i, nu);
        return z;
    };
    const auto norm2_of = [&](double nu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double zi = z_entry(i, nu);
            s += zi * zi;
        }
        return s;
    };
    const auto finish = [&](Eigen::VectorXd z, double nu, bool boundary) {
        res.u = std::move(z);
        res.value = res.u.dot(lam.cwiseProduct(res.u)) + c.dot(res.u);
        res.multiplier = nu;
        res.boundary = boundary;
        return res;
    };

    const double r_sq = radius * radius;

    // Positive semidefinite curvature with the stationary point inside the
    // ball: interior solution (minimal-norm along flat directions).
    if (lam_min >= 0.0) {
        const double phi0 = norm2_of(0.0);
        if (phi0 <= r_sq) return finish(z_of(0.0), 0.0, false);
    } else {
        // Indefinite: split off the bottom eigenspace, tolerance anchored at
        // the bottom of the spectrum (the top can be many orders larger).
        const double bottom_tol = 1e-12 * nu_floor;
        double c_bottom_sq = 0.0;
        double phi_limit = 0.0;  // ||z||^2 as nu -> nu_floor+, bottom excluded
        for (Eigen::Index i = 0; i < n; ++i) {
            const double gap = lam(i) + nu_floor;
            if (gap <= bottom_tol) {
                c_bottom_sq += c(i) * c(i);
            } else {
                const double zi = -0.5 * c(i) / gap;
                phi_limit += zi * zi;
            }
        }
        const double c_tol = 1e-12 * (c.norm() + 1.0);
        if (c_bottom_sq <= c_tol * c_tol && phi_limit <= r_sq) {
            // Hard case: pin nu at -lam_min, fill the deficit along a bottom
            // eigenvector.
            Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double gap = lam(i) + nu_floor;
                if (gap > bottom_tol) z(i) = -0.5 * c(i) / gap;
            }
            z(0) += std::sqrt(std::max(0.0, r_sq - z.squaredNorm()));
            return finish(std::move(z), nu_floor, true);
        }
    }

    // Secular equation: psi(nu) = 1/radius - 1/||z(nu)|| has a unique root in
    // (nu_floor, inf); safeguarded Newton with a bisection fallback.
    double lo = nu_floor;
    double hi = nu_floor + 0.5 * c.norm() / radius + 1e-3 * (nu_floor + 1.0);
    while (norm2_of(hi) > r_sq) hi *= 2.0;
    double nu = 0.5 * (lo + hi);
    double nu_accepted = hi;
    for (int it = 0; it < 300; ++it) {
        double phi = 0.0, dphi = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double zi = z_entry(i, nu);
            phi += zi * zi;
            if (zi != 0.0) dphi += -2.0 * zi * zi / (lam(i) + nu);
        }
        const double norm_z = std::sqrt(phi);
        if (norm_z > radius) {
            lo = nu;
        } else {
            hi = nu;
            nu_accepted = nu;
        }
        if (std::isfinite(norm_z)) {
            const double psi = 1.0 / radius - 1.0 / norm_z;
            if (std::abs(psi) <= 1e-15 / radius) {
                nu_accepted = nu;
                break;
            }
            const double dpsi = dphi / (2.0 * phi * norm_z);
            const double next = nu - psi / dpsi;
            if (next > lo && next < hi) {
                if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                                   (std::abs(hi) + std::abs(nu_floor))) {
                    nu_accepted = hi;
                    break;
                }
                nu = next;
                continue;
            }
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(hi) + std::abs(nu_floor)))
            break;
        nu = 0.5 * (lo + hi);
    }
    return finish(z_of(nu_accepted), nu_accepted, true);
}

/// Dense-matrix front end: eigendecompose, solve in the eigenbasis, map back.
inline TrsResult trs_minimize(const Eigen::MatrixXd& a_sym, const Eigen::VectorXd& b,
                              double radius) {
    const Eigen::Index n = a_sym.rows();
    if (a_sym.cols() != n || b.size() != n)
        throw std::invalid_argument("trs_minimize: dimension mismatch");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a_sym + a_sym.transpose()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("trs_minimize: eigendecomposition failed");

    TrsResult res = trs_minimize_spectral(es.eigenvalues(), es.eigenvectors().transpose() * b,
                                          radius);
    res.u = es.eigenvectors() * res.u;
    return res;
}

}  // namespace pcrbeam
