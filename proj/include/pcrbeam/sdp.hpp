#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pcrbeam::sdp {

/// One PSD cone block of the constraint stack: the slack
/// S_k(y) = constant - sum_i y(i) * A_i must stay positive semidefinite.
/// A 1x1 block models a scalar affine inequality.
struct ConeBlock {
    Eigen::MatrixXd constant;
    std::vector<std::pair<int, Eigen::MatrixXd>> coeffs;
    int dim() const { return static_cast<int>(constant.rows()); }
};

/// maximize objective . y  subject to every ConeBlock slack being PSD.
struct Problem {
    int n_vars = 0;
    Eigen::VectorXd objective;
    std::vector<ConeBlock> blocks;

    void validate() const {
        if (n_vars < 1) throw std::invalid_argument("sdp::Problem: need at least one variable");
        if (objective.size() != n_vars)
            throw std::invalid_argument("sdp::Problem: objective size mismatch");
        if (blocks.empty()) throw std::invalid_argument("sdp::Problem: no cone blocks");
        for (const auto& blk : blocks) {
            if (blk.constant.rows() != blk.constant.cols() || blk.dim() < 1)
                throw std::invalid_argument("sdp::Problem: block constant must be square");
            for (const auto& [var, mat] : blk.coeffs) {
                if (var < 0 || var >= n_vars)
                    throw std::invalid_argument("sdp::Problem: coefficient variable out of range");
                if (mat.rows() != blk.dim() || mat.cols() != blk.dim())
                    throw std::invalid_argument("sdp::Problem: coefficient size mismatch");
            }
        }
    }
};

enum class SolveStatus { optimal, near_optimal, iteration_limit, infeasible, numerical_failure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::near_optimal: return "near-optimal";
        case SolveStatus::iteration_limit: return "iteration-limit";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

struct Settings {
    /// Tolerances apply to the equilibrated problem the iterations run on.
    double feasibility_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iterations = 150;
    double step_fraction = 0.98;
    bool equilibrate = true;
    std::ostream* log = nullptr;  ///< diagnostics stream, null for silence
};

struct Result {
    SolveStatus status = SolveStatus::numerical_failure;
    Eigen::VectorXd y;
    std::vector<Eigen::MatrixXd> slack;    ///< S_k at the returned iterate
    std::vector<Eigen::MatrixXd> witness;  ///< primal X_k (certificate / multipliers)
    double objective_value = 0.0;
    double gap = std::numeric_limits<double>::infinity();
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;

    bool usable() const {
        return status == SolveStatus::optimal || status == SolveStatus::near_optimal;
    }
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Isometric vectorization of a symmetric matrix (off-diagonals scaled by
/// sqrt(2), so plain dot products reproduce Frobenius inner products).
inline void svec_into(const Eigen::MatrixXd& m, double* out) {
    const int n = static_cast<int>(m.rows());
    const double rt2 = std::numbers::sqrt2;
    int idx = 0;
    for (int j = 0; j < n; ++j) {
        out[idx++] = m(j, j);
        for (int i = j + 1; i < n; ++i) out[idx++] = rt2 * 0.5 * (m(i, j) + m(j, i));
    }
}

inline Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    Eigen::VectorXd v(n * (n + 1) / 2);
    svec_into(m, v.data());
    return v;
}

/// Largest alpha with diag(lambda) + alpha * d_hat PSD (lambda > 0).
inline double max_step_scaled(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& d_hat) {
    const Eigen::VectorXd isqrt = lambda.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd e = isqrt.asDiagonal() * d_hat * isqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e, Eigen::EigenvaluesOnly);
    const double emin = es.eigenvalues().minCoeff();
    if (emin >= 0.0) return kInf;
    return -1.0 / emin;
}

struct BlockState {
    const ConeBlock* spec = nullptr;
    int dim = 0;
    int sdim = 0;
    Eigen::MatrixXd x, s;     // interior iterates
    Eigen::MatrixXd r, rinv;  // NT congruence: r^T S r = rinv X rinv^T = diag(lambda)
    Eigen::VectorXd lambda;
    // one svec(r^T A_i r) row per local coefficient; row-major so svec can
    // write each row contiguously
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> scaled_coeffs;
    Eigen::MatrixXd rd, rd_tilde;
    Eigen::MatrixXd ds, ds_hat, dx_hat, target;
};

/// Sum of y-weighted coefficient matrices of one block.
inline Eigen::MatrixXd apply_coeffs(const ConeBlock& blk, const Eigen::VectorXd& y) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(blk.dim(), blk.dim());
    for (const auto& [var, mat] : blk.coeffs) acc.noalias() += y(var) * mat;
    return acc;
}

/// Presolve scaling: a diagonal congruence per block (PSD is invariant under
/// E M E for positive diagonal E), a scalar per block and a scalar per
/// variable. Without it the Fisher-surrogate LMIs, whose entries span many
/// orders of magnitude across floored density cells, defeat double-precision
/// Schur solves.
struct Equilibration {
    std::vector<Eigen::VectorXd> block_diag;  // E_k
    std::vector<double> block_scale;          // f_k
    Eigen::VectorXd var_scale;                // s_j

    static Equilibration compute(const Problem& prob) {
        const int n_blocks = static_cast<int>(prob.blocks.size());
        Equilibration eq;
        eq.block_diag.resize(static_cast<size_t>(n_blocks));
        eq.block_scale.assign(static_cast<size_t>(n_blocks), 1.0);
        eq.var_scale = Eigen::VectorXd::Ones(prob.n_vars);

        for (int k = 0; k < n_blocks; ++k) {
            const ConeBlock& blk = prob.blocks[static_cast<size_t>(k)];
            const int n = blk.dim();
            Eigen::VectorXd e = Eigen::VectorXd::Ones(n);
            for (int pass = 0; pass < 3; ++pass) {
                Eigen::VectorXd rowmax = Eigen::VectorXd::Zero(n);
                const auto absorb = [&](const Eigen::MatrixXd& mat) {
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                            rowmax(i) = std::max(rowmax(i), std::abs(mat(i, j)) * e(i) * e(j));
                };
                absorb(blk.constant);
                for (const auto& [var, mat] : blk.coeffs) absorb(mat);
                for (int i = 0; i < n; ++i)
                    if (rowmax(i) > 0.0)
                        e(i) = std::clamp(e(i) / std::sqrt(rowmax(i)), 1e-10, 1e10);
            }
            eq.block_diag[static_cast<size_t>(k)] = e;

            double norm_max =
                (e.asDiagonal() * blk.constant * e.asDiagonal()).norm() / std::sqrt(double(n));
            for (const auto& [var, mat] : blk.coeffs)
                norm_max = std::max(norm_max, (e.asDiagonal() * mat * e.asDiagonal()).norm() /
                                                  std::sqrt(double(n)));
            eq.block_scale[static_cast<size_t>(k)] = 1.0 / std::max(1e-10, norm_max);
        }

        Eigen::VectorXd coupling = Eigen::VectorXd::Zero(prob.n_vars);
        for (int k = 0; k < n_blocks; ++k) {
            const ConeBlock& blk = prob.blocks[static_cast<size_t>(k)];
            const Eigen::VectorXd& e = eq.block_diag[static_cast<size_t>(k)];
            for (const auto& [var, mat] : blk.coeffs) {
                const double nrm = eq.block_scale[static_cast<size_t>(k)] *
                                   (e.asDiagonal() * mat * e.asDiagonal()).norm();
                coupling(var) = std::max(coupling(var), nrm);
            }
        }
        for (int j = 0; j < prob.n_vars; ++j)
            eq.var_scale(j) = 1.0 / std::clamp(coupling(j), 1e-10, 1e10);
        return eq;
    }

    Problem apply(const Problem& prob) const {
        Problem out;
        out.n_vars = prob.n_vars;
        out.objective = var_scale.cwiseProduct(prob.objective);
        out.blocks.reserve(prob.blocks.size());
        for (size_t k = 0; k < prob.blocks.size(); ++k) {
            const auto& e = block_diag[k];
            const double f = block_scale[k];
            ConeBlock blk;
            blk.constant = f * (e.asDiagonal() * prob.blocks[k].constant * e.asDiagonal());
            blk.coeffs.reserve(prob.blocks[k].coeffs.size());
            for (const auto& [var, mat] : prob.blocks[k].coeffs)
                blk.coeffs.emplace_back(
                    var, (f * var_scale(var)) * (e.asDiagonal() * mat * e.asDiagonal()));
            out.blocks.push_back(std::move(blk));
        }
        return out;
    }
};

/// Interior-point iterations on an (already scaled) problem.
inline Result run_ipm(const Problem& prob, const Settings& settings) {
    const int m = prob.n_vars;
    const Eigen::VectorXd& b = prob.objective;
    const int n_blocks = static_cast<int>(prob.blocks.size());
    int n_total = 0;

    std::vector<BlockState> st(static_cast<size_t>(n_blocks));
    double c_norm_sq = 0.0;
    for (int k = 0; k < n_blocks; ++k) {
        BlockState& bs = st[static_cast<size_t>(k)];
        bs.spec = &prob.blocks[static_cast<size_t>(k)];
        bs.dim = bs.spec->dim();
        bs.sdim = bs.dim * (bs.dim + 1) / 2;
        n_total += bs.dim;
        c_norm_sq += bs.spec->constant.squaredNorm();

        double coeff_norm_max = 0.0;
        for (const auto& [var, mat] : bs.spec->coeffs)
            coeff_norm_max = std::max(coeff_norm_max, mat.norm());
        const double b_max = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
        const double xi = std::max({10.0, std::sqrt(static_cast<double>(bs.dim)),
                                    bs.dim * (1.0 + b_max) / (1.0 + coeff_norm_max)});
        const double eta = std::max({10.0, std::sqrt(static_cast<double>(bs.dim)),
                                     (1.0 + std::max(coeff_norm_max, bs.spec->constant.norm())) /
                                         std::sqrt(static_cast<double>(bs.dim))});
        bs.x = xi * Eigen::MatrixXd::Identity(bs.dim, bs.dim);
        bs.s = eta * Eigen::MatrixXd::Identity(bs.dim, bs.dim);
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    const double b_norm = b.norm();
    const double c_norm = std::sqrt(c_norm_sq);

    struct Metrics {
        double gap = kInf, rp = kInf, rd = kInf, pobj = 0.0, dobj = 0.0;
        double score() const { return gap + rp + rd; }
    };

    // Evaluates residuals at the current (y, X, S); refreshes bs.rd.
    const auto eval_metrics = [&](Eigen::VectorXd& rp_vec) {
        rp_vec = b;
        Metrics mt;
        mt.pobj = 0.0;
        double rd_sq = 0.0;
        for (auto& bs : st) {
            mt.pobj += bs.spec->constant.cwiseProduct(bs.x).sum();
            for (const auto& [var, mat] : bs.spec->coeffs)
                rp_vec(var) -= mat.cwiseProduct(bs.x).sum();
            bs.rd = bs.spec->constant - apply_coeffs(*bs.spec, y) - bs.s;
            rd_sq += bs.rd.squaredNorm();
        }
        mt.dobj = b.dot(y);
        mt.gap = std::abs(mt.pobj - mt.dobj) / (1.0 + std::abs(mt.pobj) + std::abs(mt.dobj));
        mt.rp = rp_vec.norm() / (1.0 + b_norm);
        mt.rd = std::sqrt(rd_sq) / (1.0 + c_norm);
        return mt;
    };

    Result best;
    best.y = y;
    const auto capture = [&](const Metrics& mt, int iter) {
        best.y = y;
        best.objective_value = mt.dobj;
        best.gap = mt.gap;
        best.primal_residual = mt.rp;
        best.dual_residual = mt.rd;
        best.iterations = iter;
        best.slack.clear();
        best.witness.clear();
        for (const auto& bs : st) {
            best.slack.push_back(bs.s);
            best.witness.push_back(bs.x);
        }
    };

    int iter = 0;
    for (; iter < settings.max_iterations; ++iter) {
        Eigen::VectorXd rp(m);
        const Metrics mt = eval_metrics(rp);

        double mu = 0.0;
        for (const auto& bs : st) mu += bs.x.cwiseProduct(bs.s).sum();
        mu /= n_total;

        if (settings.log)
            (*settings.log) << "iter " << iter << "  pobj " << mt.pobj << "  dobj " << mt.dobj
                            << "  gap " << mt.gap << "  rp " << mt.rp << "  rd " << mt.rd
                            << "  mu " << mu << '\n';

        if (mt.score() < best.gap + best.primal_residual + best.dual_residual) capture(mt, iter);
        if (mt.gap <= settings.gap_tol && mt.rp <= settings.feasibility_tol &&
            mt.rd <= settings.feasibility_tol)
            break;

        // Nesterov-Todd scaling per block.
        bool scaling_ok = true;
        for (auto& bs : st) {
            Eigen::LLT<Eigen::MatrixXd> lltx(bs.x);
            Eigen::LLT<Eigen::MatrixXd> llts(bs.s);
            if (lltx.info() != Eigen::Success || llts.info() != Eigen::Success) {
                scaling_ok = false;
                break;
            }
            const Eigen::MatrixXd lx = lltx.matrixL();
            const Eigen::MatrixXd inner = lx.transpose() * bs.s * lx;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
            if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
                scaling_ok = false;
                break;
            }
            bs.lambda = es.eigenvalues().cwiseSqrt();
            const Eigen::MatrixXd v = es.eigenvectors();
            bs.r.noalias() = lx * v * bs.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
            // rinv = diag(lambda)^{1/2} v^T lx^{-1} via a triangular solve
            const Eigen::MatrixXd tri_rhs = v * bs.lambda.cwiseSqrt().asDiagonal();
            bs.rinv = lx.transpose().triangularView<Eigen::Upper>().solve(tri_rhs).transpose();
        }
        if (!scaling_ok) break;

        // Schur complement M(i,j) = sum_k <r^T A_i r, r^T A_j r>.
        Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(m, m);
        for (auto& bs : st) {
            const int n_loc = static_cast<int>(bs.spec->coeffs.size());
            bs.scaled_coeffs.resize(n_loc, bs.sdim);
            Eigen::MatrixXd tmp(bs.dim, bs.dim);
            for (int a = 0; a < n_loc; ++a) {
                tmp.noalias() =
                    bs.r.transpose() * bs.spec->coeffs[static_cast<size_t>(a)].second * bs.r;
                svec_into(tmp, bs.scaled_coeffs.row(a).data());
            }
            const Eigen::MatrixXd gram = bs.scaled_coeffs * bs.scaled_coeffs.transpose();
            for (int a = 0; a < n_loc; ++a)
                for (int c = 0; c < n_loc; ++c)
                    schur(bs.spec->coeffs[static_cast<size_t>(a)].first,
                          bs.spec->coeffs[static_cast<size_t>(c)].first) += gram(a, c);
            bs.rd_tilde.noalias() = bs.r.transpose() * bs.rd * bs.r;
        }
        Eigen::LDLT<Eigen::MatrixXd> schur_fact(schur);
        if (schur_fact.info() != Eigen::Success) {
            schur.diagonal().array() += 1e-12 * (1.0 + schur.trace() / m);
            schur_fact.compute(schur);
            if (schur_fact.info() != Eigen::Success) break;
        }

        const auto solve_direction = [&](Eigen::VectorXd& dy) {
            Eigen::VectorXd rhs = rp;
            for (auto& bs : st) {
                const Eigen::VectorXd contrib = bs.scaled_coeffs * svec(bs.target - bs.rd_tilde);
                const int n_loc = static_cast<int>(bs.spec->coeffs.size());
                for (int a = 0; a < n_loc; ++a)
                    rhs(bs.spec->coeffs[static_cast<size_t>(a)].first) -= contrib(a);
            }
            dy = schur_fact.solve(rhs);
            dy += schur_fact.solve(rhs - schur * dy);  // one refinement step
            for (auto& bs : st) {
                bs.ds = bs.rd - apply_coeffs(*bs.spec, dy);
                bs.ds_hat.noalias() = bs.r.transpose() * bs.ds * bs.r;
                bs.dx_hat = bs.target - bs.ds_hat;
            }
        };

        // Predictor: aim straight at complementarity zero.
        for (auto& bs : st) bs.target = (-bs.lambda).asDiagonal();
        Eigen::VectorXd dy_aff(m);
        solve_direction(dy_aff);
        if (!dy_aff.allFinite()) break;

        double ap_aff = 1.0, ad_aff = 1.0;
        for (auto& bs : st) {
            ap_aff = std::min(ap_aff, max_step_scaled(bs.lambda, bs.dx_hat));
            ad_aff = std::min(ad_aff, max_step_scaled(bs.lambda, bs.ds_hat));
        }

        double mu_aff = 0.0;
        for (const auto& bs : st) {
            // <X + a dX, S + a dS> evaluated in the scaled frame, where both
            // current iterates equal diag(lambda).
            Eigen::MatrixXd xs = ap_aff * bs.dx_hat;
            xs.diagonal() += bs.lambda;
            Eigen::MatrixXd ss = ad_aff * bs.ds_hat;
            ss.diagonal() += bs.lambda;
            mu_aff += xs.cwiseProduct(ss).sum();
        }
        mu_aff /= n_total;
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 1e-10, 1.0);

        // Corrector with the Mehrotra second-order term.
        for (auto& bs : st) {
            Eigen::MatrixXd g = -0.5 * (bs.dx_hat * bs.ds_hat + bs.ds_hat * bs.dx_hat);
            g.diagonal() += (sigma * mu - bs.lambda.array().square()).matrix();
            for (int i = 0; i < bs.dim; ++i)
                for (int j = 0; j < bs.dim; ++j)
                    bs.target(i, j) = 2.0 * g(i, j) / (bs.lambda(i) + bs.lambda(j));
        }
        Eigen::VectorXd dy(m);
        solve_direction(dy);
        if (!dy.allFinite()) break;

        // Step fraction grows as the affine step gets cleaner (SDPT3-style).
        const double gamma =
            std::min(settings.step_fraction, 0.9 + 0.09 * std::min(ap_aff, ad_aff));
        double ap = 1.0, ad = 1.0;
        for (auto& bs : st) {
            ap = std::min(ap, gamma * max_step_scaled(bs.lambda, bs.dx_hat));
            ad = std::min(ad, gamma * max_step_scaled(bs.lambda, bs.ds_hat));
        }
        ap = std::min(ap, 1.0);
        ad = std::min(ad, 1.0);

        // Complementarity safeguard: shrink steps that would grow mu, which
        // happens when the second-order correction overshoots on nearly
        // singular Schur systems.
        const auto mu_after = [&](double a_p, double a_d) {
            double acc = 0.0;
            for (const auto& bs : st) {
                Eigen::MatrixXd xs = a_p * bs.dx_hat;
                xs.diagonal() += bs.lambda;
                Eigen::MatrixXd ss = a_d * bs.ds_hat;
                ss.diagonal() += bs.lambda;
                acc += xs.cwiseProduct(ss).sum();
            }
            return acc / n_total;
        };
        for (int halvings = 0;
             halvings < 6 && mu_after(ap, ad) > (1.0 - 0.01 * std::min(ap, ad)) * mu;
             ++halvings) {
            ap *= 0.5;
            ad *= 0.5;
        }
        if (ap < 1e-8 && ad < 1e-8) break;  // stalled

        for (auto& bs : st) {
            const Eigen::MatrixXd dx = bs.r * bs.dx_hat * bs.r.transpose();
            bs.x += ap * 0.5 * (dx + dx.transpose().eval());
            bs.s += ad * 0.5 * (bs.ds + bs.ds.transpose().eval());
        }
        y += ad * dy;
    }

    // Final evaluation (the loop may have broken before scoring the last step).
    {
        Eigen::VectorXd rp(m);
        const Metrics mt = eval_metrics(rp);
        if (mt.score() < best.gap + best.primal_residual + best.dual_residual) capture(mt, iter);
    }

    Result res = std::move(best);
    const double relaxed = 1e-6;
    if (res.gap <= settings.gap_tol && res.primal_residual <= settings.feasibility_tol &&
        res.dual_residual <= settings.feasibility_tol) {
        res.status = SolveStatus::optimal;
    } else if (res.gap <= relaxed && res.primal_residual <= relaxed && res.dual_residual <= relaxed) {
        res.status = SolveStatus::near_optimal;
    } else if (std::abs(res.objective_value) > 1e11 * (1.0 + b_norm) && res.dual_residual < 1e-6) {
        // Dual objective ran away while staying dual-feasible: the primal side
        // is infeasible (the maximization is unbounded).
        res.status = SolveStatus::infeasible;
    } else if (iter >= settings.max_iterations) {
        res.status = SolveStatus::iteration_limit;
    } else {
        res.status = SolveStatus::numerical_failure;
    }
    return res;
}

}  // namespace detail

/// Primal-dual path-following interior-point method with Nesterov-Todd
/// scaling and a Mehrotra predictor-corrector step, specialized to the
/// block-diagonal dual standard form used throughout this project.
inline Result solve(const Problem& prob, const Settings& settings = {}) {
    prob.validate();
    if (!settings.equilibrate) return detail::run_ipm(prob, settings);

    const detail::Equilibration eq = detail::Equilibration::compute(prob);
    Result res = detail::run_ipm(eq.apply(prob), settings);

    // Map the scaled solution back: y = s .* y~, S = E^-1 S~ E^-1 / f,
    // X = f E X~ E.
    res.y = eq.var_scale.cwiseProduct(res.y);
    res.objective_value = prob.objective.dot(res.y);
    for (size_t k = 0; k < prob.blocks.size(); ++k) {
        const Eigen::VectorXd einv = eq.block_diag[k].cwiseInverse();
        res.slack[k] =
            (einv.asDiagonal() * res.slack[k] * einv.asDiagonal()) / eq.block_scale[k];
        res.witness[k] = eq.block_scale[k] *
                         (eq.block_diag[k].asDiagonal() * res.witness[k] *
                          eq.block_diag[k].asDiagonal());
    }
    return res;
}

}  // namespace pcrbeam::sdp
