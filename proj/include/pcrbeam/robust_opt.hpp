#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pcrbeam/fisher_pcrb.hpp"
#include "pcrbeam/quad_model.hpp"
#include "pcrbeam/sdp.hpp"
#include "pcrbeam/trust_region.hpp"
#include "pcrbeam/types.hpp"

namespace pcrbeam {

/// [[Re, -Im], [Im, Re]] embedding; PSD-preserving, every eigenvalue of the
/// input appears twice in the output.
inline Eigen::MatrixXd realify_hermitian(const Eigen::MatrixXcd& h) {
    const Eigen::Index n = h.rows();
    if (h.cols() != n) throw std::invalid_argument("realify_hermitian: matrix must be square");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("realify_hermitian: input is not Hermitian");
    Eigen::MatrixXd out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = h.real();
    out.bottomRightCorner(n, n) = h.real();
    out.topRightCorner(n, n) = -h.imag();
    out.bottomLeftCorner(n, n) = h.imag();
    return out;
}

namespace detail {

/// Real parametrization of Hermitian n x n matrices: first the n diagonal
/// entries, then (Re, Im) per strict upper pair in row-major order.
inline int hermitian_param_count(int n) { return n * n; }

inline Eigen::MatrixXcd hermitian_from_params(const Eigen::VectorXd& w, int n) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) h(i, i) = w(i);
    int idx = n;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) {
            h(p, q) = Complex(w(idx), w(idx + 1));
            h(q, p) = std::conj(h(p, q));
            idx += 2;
        }
    return h;
}

/// Coefficients c with tr(G * hermitian_from_params(w)) = c . w for
/// Hermitian G.
inline Eigen::VectorXd hermitian_trace_coeffs(const Eigen::MatrixXcd& g) {
    const int n = static_cast<int>(g.rows());
    Eigen::VectorXd c(hermitian_param_count(n));
    for (int i = 0; i < n; ++i) c(i) = g(i, i).real();
    int idx = n;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) {
            c(idx++) = 2.0 * g(p, q).real();
            c(idx++) = 2.0 * g(p, q).imag();
        }
    return c;
}

/// Basis element j of the parametrization above.
inline Eigen::MatrixXcd hermitian_basis_element(int j, int n) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(hermitian_param_count(n));
    w(j) = 1.0;
    return hermitian_from_params(w, n);
}

/// N x n_tx^2 matrix whose column j holds g(E_j): the observation Fisher
/// weights of the j-th Hermitian basis element. g(W) = gmat * params(W).
inline Eigen::MatrixXd g_functional_matrix(const QuadraticPcrbModel& model, int n_tx) {
    const int n = model.grid.n_points;
    const int m = hermitian_param_count(n_tx);
    Eigen::MatrixXd gmat(n, m);
    for (int k = 0; k < n; ++k)
        gmat.row(k) = model.sensing_scale *
                      hermitian_trace_coeffs(model.gains[static_cast<size_t>(k)]).transpose();
    return gmat;
}

}  // namespace detail

/// Output of one robust / benchmark design.
struct RobustSolution {
    TransmitCovariance w_star;
    double t_star = 0.0;       ///< worst-case posterior Fisher value (the SDP objective)
    double lambda_star = 0.0;  ///< S-procedure multiplier
    double pcrb_star = 0.0;    ///< 1 / t_star
    sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
};

/// Exact worst case of the quadratic surrogate at a fixed covariance.
struct WorstCaseCertificate {
    Eigen::VectorXd u_star;   ///< coordinates in the zero-sum basis
    Eigen::VectorXd e_star;   ///< basis * u_star
    double objective = 0.0;   ///< minimized posterior Fisher surrogate
    double pcrb = 0.0;        ///< 1 / objective (infinite if objective <= 0)
    double multiplier = 0.0;  ///< ball multiplier; the tight S-procedure lambda
    bool boundary = false;
};

/// LMI block of the robust problem at a candidate point, for residual checks.
inline Eigen::MatrixXd assemble_robust_lmi(const QuadraticPcrbModel& model,
                                           const Eigen::MatrixXcd& w, double t, double lambda) {
    const int n = model.grid.n_points;
    const Eigen::VectorXd g = g_vector(model, w);
    Eigen::MatrixXd phi(n, n);
    phi.topLeftCorner(n - 1, n - 1) = model.basis_q_basis;
    phi.topLeftCorner(n - 1, n - 1).diagonal().array() += lambda;
    phi.topRightCorner(n - 1, 1) = 0.5 * (model.basis.transpose() * (model.f_p + g));
    phi.bottomLeftCorner(1, n - 1) = phi.topRightCorner(n - 1, 1).transpose();
    phi(n - 1, n - 1) = model.c_p + model.p_bar.density.dot(g) - t -
                        lambda * model.ball_radius * model.ball_radius;
    return phi;
}

/// Non-robust benchmark: maximize the nominal posterior Fisher value. The
/// objective is tr(A W) + c_p with A PSD, so the optimum is the full budget
/// on the top eigenvector of A; no conic solve needed.
inline RobustSolution solve_nominal(const QuadraticPcrbModel& model, const RadarScene& scene) {
    const int n = scene.n_tx;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (int k = 0; k < model.grid.n_points; ++k)
        a += model.p_bar.density(k) * model.gains[static_cast<size_t>(k)];
    a *= model.sensing_scale;

    RobustSolution sol;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
    const double lam_max = es.eigenvalues().maxCoeff();
    if (lam_max <= 1e-300) {
        // Degenerate gain (single-antenna scenes): any feasible W is optimal.
        sol.w_star = isotropic_covariance(scene);
        sol.t_star = model.c_p;
    } else {
        const Eigen::VectorXcd v = es.eigenvectors().col(n - 1);
        sol.w_star.w = scene.power_budget * (v * v.adjoint());
        sol.t_star = lam_max * scene.power_budget + model.c_p;
    }
    sol.lambda_star = 0.0;
    sol.pcrb_star = 1.0 / sol.t_star;
    sol.status = sdp::SolveStatus::optimal;
    return sol;
}

/// Exact minimum of the quadratic surrogate over the perturbation ball at a
/// fixed covariance; certifies S-procedure tightness of the robust solve.
/// Runs in the model's accurately-factored eigenbasis, the same data the LMI
/// is assembled from.
inline WorstCaseCertificate trust_region_worst_case(const QuadraticPcrbModel& model,
                                                    const TransmitCovariance& w) {
    const Eigen::VectorXd g = g_vector(model, w.w);
    const double constant = model.c_p + model.p_bar.density.dot(g);

    WorstCaseCertificate cert;
    if (model.ball_radius == 0.0) {
        cert.u_star = Eigen::VectorXd::Zero(model.grid.n_points - 1);
        cert.e_star = Eigen::VectorXd::Zero(model.grid.n_points);
        cert.objective = constant;
    } else {
        const Eigen::VectorXd c = model.q_directions.transpose() * (model.f_p + g);
        const TrsResult trs = trs_minimize_spectral(model.q_curvatures, c, model.ball_radius);
        cert.e_star = model.q_directions * trs.u;
        cert.u_star = model.basis.transpose() * cert.e_star;
        cert.objective = trs.value + constant;
        cert.multiplier = trs.multiplier;
        cert.boundary = trs.boundary;
    }
    cert.pcrb = cert.objective > 0.0 ? 1.0 / cert.objective
                                     : std::numeric_limits<double>::infinity();
    return cert;
}

namespace detail {

inline RobustSolution make_solution_from(const sdp::Result& res, const QuadraticPcrbModel& model,
                                         const RadarScene& scene, int t_index, int lambda_index) {
    RobustSolution sol;
    const int n = scene.n_tx;
    Eigen::MatrixXcd w = hermitian_from_params(res.y.head(hermitian_param_count(n)), n);
    sol.w_star.w = 0.5 * (w + w.adjoint().eval());
    sol.t_star = res.y(t_index);
    sol.lambda_star = lambda_index >= 0 ? res.y(lambda_index) : 0.0;
    sol.pcrb_star = sol.t_star > 0.0 ? 1.0 / sol.t_star : std::numeric_limits<double>::infinity();
    sol.status = res.status;
    sol.gap = res.gap;
    sol.primal_residual = res.primal_residual;
    sol.dual_residual = res.dual_residual;
    sol.iterations = res.iterations;
    (void)model;
    return sol;
}

/// Shared blocks: the realified W PSD cone and the scalar trace budget.
inline void append_covariance_blocks(sdp::Problem& prob, const RadarScene& scene) {
    const int n = scene.n_tx;
    const int m_w = hermitian_param_count(n);
    sdp::ConeBlock w_block;
    w_block.constant = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < m_w; ++j)
        w_block.coeffs.emplace_back(j, -realify_hermitian(hermitian_basis_element(j, n)));
    prob.blocks.push_back(std::move(w_block));

    sdp::ConeBlock trace_block;
    trace_block.constant = Eigen::MatrixXd::Constant(1, 1, scene.power_budget);
    for (int i = 0; i < n; ++i)
        trace_block.coeffs.emplace_back(i, Eigen::MatrixXd::Constant(1, 1, 1.0));
    prob.blocks.push_back(std::move(trace_block));
}

}  // namespace detail

/// Robust design: maximize the worst-case posterior Fisher surrogate over the
/// whole perturbation ball, with the infinitely many ball constraints folded
/// into one LMI by the S-procedure. Zero radius falls back to the nominal
/// closed form (the multiplier certificate needs a ball with interior).
inline RobustSolution solve_robust(const QuadraticPcrbModel& model, const RadarScene& scene,
                                   sdp::Settings settings = {}) {
    scene.validate();
    if (model.delta == 0.0) return solve_nominal(model, scene);
    if (model.ball_radius <= 1e-3) {
        // Vanishing ball: the tight multiplier grows like ||linear term||/(2r)
        // and drags the interior-point path with it. The nominal design plus
        // its exact worst-case certificate is feasible and optimal to O(r^2).
        RobustSolution sol = solve_nominal(model, scene);
        const WorstCaseCertificate cert = trust_region_worst_case(model, sol.w_star);
        sol.t_star = cert.objective;
        sol.lambda_star = cert.multiplier;
        sol.pcrb_star = 1.0 / sol.t_star;
        return sol;
    }

    const int n_tx = scene.n_tx;
    const int m_w = detail::hermitian_param_count(n_tx);
    const int t_index = m_w;
    const int lambda_index = m_w + 1;

    sdp::Problem prob;
    prob.n_vars = m_w + 2;
    prob.objective = Eigen::VectorXd::Zero(prob.n_vars);
    prob.objective(t_index) = 1.0;

    detail::append_covariance_blocks(prob, scene);

    // lambda >= 0
    sdp::ConeBlock lambda_block;
    lambda_block.constant = Eigen::MatrixXd::Zero(1, 1);
    lambda_block.coeffs.emplace_back(lambda_index, Eigen::MatrixXd::Constant(1, 1, -1.0));
    prob.blocks.push_back(std::move(lambda_block));

    // The LMI block, assembled in the eigenbasis of the prior-Fisher
    // quadratic (an exact rotation; it exposes the curvature spread on the
    // diagonal where the presolve congruence can equilibrate it). Slack =
    // constant - sum y_i A_i must equal the LMI at y, so A_i is minus the
    // derivative of the LMI in variable i.
    const Eigen::MatrixXd gmat = detail::g_functional_matrix(model, n_tx);
    const int k = static_cast<int>(model.q_curvatures.size());
    const Eigen::MatrixXd soft_g = model.q_directions.transpose() * gmat;  // k x m_w
    const Eigen::RowVectorXd pbar_g = model.p_bar.density.transpose() * gmat;

    sdp::ConeBlock lmi;
    lmi.constant = Eigen::MatrixXd::Zero(k + 1, k + 1);
    lmi.constant.topLeftCorner(k, k).diagonal() = model.q_curvatures;
    lmi.constant.topRightCorner(k, 1) = 0.5 * (model.q_directions.transpose() * model.f_p);
    lmi.constant.bottomLeftCorner(1, k) = lmi.constant.topRightCorner(k, 1).transpose();
    lmi.constant(k, k) = model.c_p;

    for (int j = 0; j < m_w; ++j) {
        Eigen::MatrixXd aj = Eigen::MatrixXd::Zero(k + 1, k + 1);
        aj.topRightCorner(k, 1) = -0.5 * soft_g.col(j);
        aj.bottomLeftCorner(1, k) = aj.topRightCorner(k, 1).transpose();
        aj(k, k) = -pbar_g(j);
        lmi.coeffs.emplace_back(j, std::move(aj));
    }
    {
        Eigen::MatrixXd at = Eigen::MatrixXd::Zero(k + 1, k + 1);
        at(k, k) = 1.0;
        lmi.coeffs.emplace_back(t_index, std::move(at));

        Eigen::MatrixXd al = Eigen::MatrixXd::Zero(k + 1, k + 1);
        al.diagonal().head(k).array() = -1.0;
        al(k, k) = model.ball_radius * model.ball_radius;
        lmi.coeffs.emplace_back(lambda_index, std::move(al));
    }
    prob.blocks.push_back(std::move(lmi));

    sdp::Result res = sdp::solve(prob, settings);
    if (!res.usable()) {
        // Documented relax-and-retry: large LMI blocks sit near the edge of
        // double-precision interior-point accuracy.
        sdp::Settings relaxed = settings;
        relaxed.feasibility_tol = std::max(settings.feasibility_tol, 1e-6);
        relaxed.gap_tol = std::max(settings.gap_tol, 1e-6);
        sdp::Result retry = sdp::solve(prob, relaxed);
        if (retry.usable() || retry.gap + retry.primal_residual + retry.dual_residual <
                                  res.gap + res.primal_residual + res.dual_residual) {
            if (retry.status == sdp::SolveStatus::optimal)
                retry.status = sdp::SolveStatus::near_optimal;
            res = std::move(retry);
        }
    }
    return detail::make_solution_from(res, model, scene, t_index, lambda_index);
}

/// Enumeration benchmark: guard the surrogate constraint only at the sampled
/// perturbations (finitely many scalar inequalities in (W, t)).
inline RobustSolution solve_enumeration(const QuadraticPcrbModel& model, const RadarScene& scene,
                                        const std::vector<Eigen::VectorXd>& error_samples,
                                        sdp::Settings settings = {}) {
    scene.validate();
    if (error_samples.empty())
        throw std::invalid_argument("solve_enumeration: need at least one sample");
    const double ball_sq = model.delta * model.delta;
    for (const auto& e : error_samples)
        if (error_energy(e, model.grid) > ball_sq * (1.0 + 1e-9) + 1e-15)
            throw std::invalid_argument("solve_enumeration: sample outside the energy ball");

    const int n_tx = scene.n_tx;
    const int m_w = detail::hermitian_param_count(n_tx);
    const int t_index = m_w;

    sdp::Problem prob;
    prob.n_vars = m_w + 1;
    prob.objective = Eigen::VectorXd::Zero(prob.n_vars);
    prob.objective(t_index) = 1.0;

    detail::append_covariance_blocks(prob, scene);

    const Eigen::MatrixXd gmat = detail::g_functional_matrix(model, n_tx);
    for (const auto& e : error_samples) {
        sdp::ConeBlock row;
        row.constant = Eigen::MatrixXd::Constant(
            1, 1, e.dot(model.q_p * e) + model.f_p.dot(e) + model.c_p);
        const Eigen::VectorXd wcoef = gmat.transpose() * (e + model.p_bar.density);
        for (int j = 0; j < m_w; ++j)
            row.coeffs.emplace_back(j, Eigen::MatrixXd::Constant(1, 1, -wcoef(j)));
        row.coeffs.emplace_back(t_index, Eigen::MatrixXd::Constant(1, 1, 1.0));
        prob.blocks.push_back(std::move(row));
    }

    const sdp::Result res = sdp::solve(prob, settings);
    return detail::make_solution_from(res, model, scene, t_index, -1);
}

/// Error-vector samples for the enumeration benchmark, drawn from the
/// evaluation sampler; boundary_only rescales each sample onto the ball
/// surface (the optimizer's set does not require nonnegative densities).
inline std::vector<Eigen::VectorXd> generate_error_samples(const GriddedPdf& p_bar,
                                                           const AngleGrid& grid, double delta,
                                                           const PerturbationScheme& scheme,
                                                           int count, std::uint64_t seed,
                                                           bool boundary_only = false) {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(static_cast<size_t>(count));
    while (static_cast<int>(samples.size()) < count) {
        auto [pdf, e] = sample_real_pdf(p_bar, grid, delta, scheme, rng);
        const double energy = error_energy(e, grid);
        if (boundary_only) {
            if (energy <= 0.0) continue;
            e *= delta / std::sqrt(energy) * (1.0 - 1e-12);
        }
        samples.push_back(std::move(e));
    }
    return samples;
}

/// Writes a solution as interleaved real/imag CSV with a metadata header.
inline void save_solution(const std::string& path, const RobustSolution& sol) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_solution: cannot open " + path);
    out.precision(17);
    const Eigen::Index n = sol.w_star.w.rows();
    out << "# pcrbeam robust solution\n";
    out << "# status=" << sdp::to_string(sol.status) << '\n';
    out << "# t_star=" << sol.t_star << '\n';
    out << "# lambda_star=" << sol.lambda_star << '\n';
    out << "# pcrb_star=" << sol.pcrb_star << '\n';
    out << "# n_tx=" << n << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j) out << ',';
            out << sol.w_star.w(i, j).real() << ',' << sol.w_star.w(i, j).imag();
        }
        out << '\n';
    }
}

inline RobustSolution load_solution(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_solution: cannot open " + path);
    RobustSolution sol;
    std::string line;
    int n = 0;
    const auto parse_scalar = [](const std::string& l) {
        return std::stod(l.substr(l.find('=') + 1));
    };
    while (std::getline(in, line)) {
        if (line.rfind("# status=", 0) == 0) {
            const std::string name = line.substr(9);
            if (name == "optimal") sol.status = sdp::SolveStatus::optimal;
            else if (name == "near-optimal") sol.status = sdp::SolveStatus::near_optimal;
            else if (name == "infeasible") sol.status = sdp::SolveStatus::infeasible;
            else sol.status = sdp::SolveStatus::numerical_failure;
        } else if (line.rfind("# t_star=", 0) == 0) {
            sol.t_star = parse_scalar(line);
        } else if (line.rfind("# lambda_star=", 0) == 0) {
            sol.lambda_star = parse_scalar(line);
        } else if (line.rfind("# pcrb_star=", 0) == 0) {
            sol.pcrb_star = parse_scalar(line);
        } else if (line.rfind("# n_tx=", 0) == 0) {
            n = static_cast<int>(parse_scalar(line));
            sol.w_star.w.resize(n, n);
            for (int i = 0; i < n; ++i) {
                if (!std::getline(in, line)) throw std::runtime_error("load_solution: short file");
                std::istringstream ss(line);
                std::string cell;
                for (int j = 0; j < n; ++j) {
                    std::getline(ss, cell, ',');
                    const double re = std::stod(cell);
                    std::getline(ss, cell, ',');
                    const double im = std::stod(cell);
                    sol.w_star.w(i, j) = Complex(re, im);
                }
            }
        }
    }
    if (n == 0) throw std::runtime_error("load_solution: missing matrix in " + path);
    return sol;
}

}  // namespace pcrbeam
