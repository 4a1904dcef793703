#pragma once

#include <vector>

#include "pcrbeam/array_model.hpp"
#include "pcrbeam/prior_pdf.hpp"
#include "pcrbeam/types.hpp"

namespace pcrbeam {

/// First-derivative matrix on the midpoint grid: central differences in the
/// interior, one-sided first order at the two boundary rows. Exact on linear
/// functions everywhere.
inline Eigen::MatrixXd difference_matrix(const AngleGrid& grid) {
    const int n = grid.n_points;
    if (n < 3) throw std::invalid_argument("difference_matrix: grid too coarse (need n >= 3)");
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    const double h = grid.spacing;
    d(0, 0) = -1.0 / h;
    d(0, 1) = 1.0 / h;
    for (int k = 1; k + 1 < n; ++k) {
        d(k, k - 1) = -0.5 / h;
        d(k, k + 1) = 0.5 / h;
    }
    d(n - 1, n - 2) = -1.0 / h;
    d(n - 1, n - 1) = 1.0 / h;
    return d;
}

namespace detail {

/// Spectrum of K^T K from the factor K via one-sided Jacobi on the columns
/// of K^T. For row-scaled factors (diagonal times a well-conditioned core,
/// which is how the prior-Fisher factor looks when density cells sit at the
/// floor) this computes every eigenvalue to high relative accuracy, where a
/// dense eigensolve of K^T K loses the small end of the spectrum to
/// eps * ||K^T K|| roundoff.
inline void factored_spectrum(const Eigen::MatrixXd& k_factor, Eigen::VectorXd& eigenvalues,
                              Eigen::MatrixXd& eigenvectors) {
    const Eigen::Index m = k_factor.cols();  // dimension of K^T K
    Eigen::MatrixXd a = k_factor.transpose();  // m x n, orthogonalize its n columns
    const Eigen::Index n = a.cols();

    // Larger columns first speeds convergence on graded data (de Rijk).
    {
        std::vector<Eigen::Index> by_norm(static_cast<size_t>(a.cols()));
        for (Eigen::Index j = 0; j < a.cols(); ++j) by_norm[static_cast<size_t>(j)] = j;
        std::sort(by_norm.begin(), by_norm.end(), [&](Eigen::Index lhs, Eigen::Index rhs) {
            return a.col(lhs).squaredNorm() > a.col(rhs).squaredNorm();
        });
        Eigen::MatrixXd sorted(a.rows(), a.cols());
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            sorted.col(j) = a.col(by_norm[static_cast<size_t>(j)]);
        a = std::move(sorted);
    }

    const double tol = 1e-15;
    for (int sweep = 0; sweep < 40; ++sweep) {
        bool rotated = false;
        for (Eigen::Index i = 0; i < n - 1; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double alpha = a.col(i).squaredNorm();
                const double beta = a.col(j).squaredNorm();
                const double gamma = a.col(i).dot(a.col(j));
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                const Eigen::VectorXd ai = a.col(i);
                a.col(i) = c * ai - s * a.col(j);
                a.col(j) = s * ai + c * a.col(j);
            }
        }
        if (!rotated) break;
    }

    // Orthogonal columns now hold sigma_j * u_j; zero columns span the null
    // space of K^T K.
    std::vector<std::pair<double, Eigen::Index>> order(static_cast<size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) order[static_cast<size_t>(j)] = {a.col(j).norm(), j};
    std::sort(order.begin(), order.end(),
              [](const auto& lhs, const auto& rhs) { return lhs.first > rhs.first; });

    eigenvalues.resize(m);
    eigenvectors.resize(m, m);
    const double rank_tol = order.empty() ? 0.0 : 1e-300;
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < m && j < n; ++j) {
        const auto& [nrm, col] = order[static_cast<size_t>(j)];
        if (nrm <= rank_tol) break;
        eigenvalues(j) = nrm * nrm;
        eigenvectors.col(j) = a.col(col) / nrm;
        ++rank;
    }
    if (rank < m) {
        // Complete the null space orthogonally.
        Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(m, m);
        for (Eigen::Index j = 0; j < rank; ++j)
            proj -= eigenvectors.col(j) * eigenvectors.col(j).transpose();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(proj);
        const Eigen::MatrixXd q = qr.householderQ();
        for (Eigen::Index j = rank; j < m; ++j) {
            eigenvalues(j) = 0.0;
            eigenvectors.col(j) = q.col(j - rank);
        }
    }
    // ascending, to match the self-adjoint solver convention
    eigenvalues.reverseInPlace();
    eigenvectors = eigenvectors.rowwise().reverse().eval();
}

}  // namespace detail

/// Orthonormal basis of the zero-sum subspace {e : 1^T e = 0}, Helmert
/// construction: column j has 1/sqrt(j(j+1)) on the first j rows and
/// -j/sqrt(j(j+1)) on row j+1. Deterministic and exactly orthonormal in
/// closed form, unlike a numeric null-space factorization.
inline Eigen::MatrixXd nullspace_basis(int n) {
    if (n < 2) throw std::invalid_argument("nullspace_basis: need n >= 2");
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n - 1);
    for (int j = 1; j < n; ++j) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
        for (int i = 0; i < j; ++i) b(i, j - 1) = scale;
        b(j, j - 1) = -static_cast<double>(j) * scale;
    }
    return b;
}

/// Discretized second-order surrogate of the prior Fisher term around the
/// known PDF, plus everything the robust solve consumes: the quadratic
/// (q_p, f_p, c_p), the zero-sum basis, the per-angle gain matrices and the
/// scale that turns tr(G_k W) into the observation Fisher summand.
struct QuadraticPcrbModel {
    Eigen::MatrixXd q_p;      ///< N x N, symmetric
    Eigen::VectorXd f_p;      ///< N
    double c_p = 0.0;         ///< prior Fisher value at zero perturbation
    Eigen::MatrixXd basis;    ///< N x (N-1), orthonormal, columns sum to zero
    Eigen::MatrixXd basis_q_basis;  ///< basis^T q_p basis, cached for the LMI and the oracle
    std::vector<Eigen::MatrixXcd> gains;  ///< Mdot^H Mdot per grid point
    double sensing_scale = 0.0;           ///< 2 L gamma spacing / sigma^2
    GriddedPdf p_bar;
    AngleGrid grid;
    double delta = 0.0;
    double ball_radius = 0.0;  ///< delta / sqrt(spacing)

    // Eigendecomposition of basis_q_basis, mapped back to the density axis:
    // q_directions has orthonormal zero-sum columns with
    // q_directions^T q_p q_directions = diag(q_curvatures). The robust LMI is
    // assembled in this basis, where the curvature spread from floored
    // density cells (up to ~1/(spacing * floor)) sits on the diagonal and a
    // diagonal congruence can equilibrate it; in the raw basis the same
    // spread defeats double-precision interior-point steps.
    Eigen::MatrixXd q_directions;   ///< N x (N-1)
    Eigen::VectorXd q_curvatures;   ///< ascending
};

inline QuadraticPcrbModel build_quadratic_model(const GriddedPdf& p_bar,
                                                const AngleGrid& grid,
                                                std::vector<Eigen::MatrixXcd> gains,
                                                const RadarScene& scene,
                                                double delta) {
    scene.validate();
    p_bar.validate(grid);
    if (delta < 0.0) throw std::invalid_argument("build_quadratic_model: delta must be >= 0");
    if (static_cast<int>(gains.size()) != grid.n_points)
        throw std::invalid_argument("build_quadratic_model: gains/grid size mismatch");

    const int n = grid.n_points;
    const double h = grid.spacing;
    const Eigen::VectorXd p = floored_density(p_bar);

    const Eigen::MatrixXd d = difference_matrix(grid);
    const Eigen::VectorXd dp = d * p;
    const Eigen::VectorXd s1 = p.cwiseInverse();
    const Eigen::VectorXd s2 = s1.cwiseProduct(s1);
    const Eigen::VectorXd s3 = s2.cwiseProduct(s1);

    QuadraticPcrbModel model;
    // q_p = (D^T S1 D - (S2 V0 D + D^T V0 S2) + S3 V0^2) * h, with V0 = diag(dp)
    const Eigen::MatrixXd s2v0d = (s2.cwiseProduct(dp)).asDiagonal() * d;
    Eigen::MatrixXd q = d.transpose() * s1.asDiagonal() * d;
    q.noalias() -= s2v0d;
    q.noalias() -= s2v0d.transpose();
    q += (s3.cwiseProduct(dp).cwiseProduct(dp)).asDiagonal();
    q *= h;
    model.q_p = 0.5 * (q + q.transpose().eval());

    model.f_p = (2.0 * (d.transpose() * s1.cwiseProduct(dp)) - s2.cwiseProduct(dp).cwiseProduct(dp)) * h;
    model.c_p = dp.cwiseProduct(dp).dot(s1) * h;

    model.basis = nullspace_basis(n);
    model.basis_q_basis = model.basis.transpose() * model.q_p * model.basis;
    model.basis_q_basis = 0.5 * (model.basis_q_basis + model.basis_q_basis.transpose().eval());

    model.gains = std::move(gains);
    model.sensing_scale = 2.0 * scene.n_samples * scene.gamma * h / scene.noise_power;
    model.p_bar = p_bar;
    model.grid = grid;
    model.delta = delta;
    model.ball_radius = delta / std::sqrt(h);

    // Spectrum from the Gram factor sqrt(h) P^{-1/2} (D - diag(dp/p)):
    // q_p = factor^T factor exactly, and the factored Jacobi sweep keeps the
    // soft curvatures accurate next to the floored-cell stiffness.
    Eigen::MatrixXd mform = d;
    mform -= Eigen::MatrixXd((dp.cwiseQuotient(p)).asDiagonal());
    const Eigen::MatrixXd k_factor =
        std::sqrt(h) * (p.cwiseSqrt().cwiseInverse().asDiagonal() * (mform * model.basis));
    Eigen::MatrixXd u_vectors;
    detail::factored_spectrum(k_factor, model.q_curvatures, u_vectors);
    model.q_directions = model.basis * u_vectors;
    return model;
}

/// Quadratic surrogate of the prior Fisher term at perturbation e.
inline double prior_fisher_quadratic(const QuadraticPcrbModel& model, const Eigen::VectorXd& e) {
    if (e.size() != model.q_p.rows())
        throw std::invalid_argument("prior_fisher_quadratic: perturbation size mismatch");
    return e.dot(model.q_p * e) + model.f_p.dot(e) + model.c_p;
}

/// Observation Fisher weights g_n(W) = sensing_scale * tr(G_n W).
inline Eigen::VectorXd g_vector(const QuadraticPcrbModel& model, const Eigen::MatrixXcd& w) {
    Eigen::VectorXd g(model.grid.n_points);
    for (int k = 0; k < model.grid.n_points; ++k)
        g(k) = model.sensing_scale * real_trace_product(model.gains[static_cast<size_t>(k)], w);
    return g;
}

}  // namespace pcrbeam
