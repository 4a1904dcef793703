#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "pcrbeam/types.hpp"

namespace pcrbeam {

/// Uniform midpoint grid over [-pi/2, pi/2): theta_k = -pi/2 + (k + 1/2) * spacing.
/// Midpoints keep every evaluation strictly inside the open right boundary.
struct AngleGrid {
    int n_points = 0;
    double spacing = 0.0;
    Eigen::VectorXd points;
};

inline AngleGrid make_angle_grid(int n_points) {
    if (n_points < 1) throw std::invalid_argument("make_angle_grid: n_points must be >= 1");
    AngleGrid grid;
    grid.n_points = n_points;
    grid.spacing = kPi / n_points;
    grid.points.resize(n_points);
    for (int k = 0; k < n_points; ++k)
        grid.points(k) = -kPi / 2.0 + (k + 0.5) * grid.spacing;
    return grid;
}

/// Grid whose spacing is as close as possible to the requested one while still
/// dividing pi into an integer number of cells.
inline AngleGrid make_angle_grid_from_spacing(double spacing) {
    if (!(spacing > 0.0) || spacing > kPi)
        throw std::invalid_argument("make_angle_grid_from_spacing: spacing out of range");
    const int n = static_cast<int>(std::llround(kPi / spacing));
    return make_angle_grid(std::max(1, n));
}

/// Probability density sampled at the grid points, units 1/radian.
struct GriddedPdf {
    Eigen::VectorXd density;

    void validate(const AngleGrid& grid) const {
        if (density.size() != grid.n_points)
            throw std::invalid_argument("GriddedPdf: size mismatch with grid");
        if ((density.array() < 0.0).any())
            throw std::invalid_argument("GriddedPdf: negative density");
        const double mass = density.sum() * grid.spacing;
        if (std::abs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("GriddedPdf: density does not integrate to 1");
    }
};

/// Density with the shared floor applied, for use ahead of any division.
inline Eigen::VectorXd floored_density(const GriddedPdf& pdf) {
    return pdf.density.cwiseMax(kDensityFloor);
}

/// One-dimensional Gaussian mixture on the angle axis.
struct GaussianMixture {
    Eigen::VectorXd weights;
    Eigen::VectorXd means;      ///< radians
    Eigen::VectorXd variances;  ///< radians^2

    void validate() const {
        const auto k = weights.size();
        if (k < 1 || means.size() != k || variances.size() != k)
            throw std::invalid_argument("GaussianMixture: component size mismatch");
        if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("GaussianMixture: weights must be a simplex vector");
        if ((variances.array() <= 0.0).any())
            throw std::invalid_argument("GaussianMixture: variances must be > 0");
    }

    double density(double theta) const {
        double d = 0.0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            const double s2 = variances(i);
            const double z = theta - means(i);
            d += weights(i) / std::sqrt(2.0 * kPi * s2) * std::exp(-z * z / (2.0 * s2));
        }
        return d;
    }

    /// Probability mass the untruncated mixture places on [-pi/2, pi/2).
    double mass_on_domain() const {
        double m = 0.0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            const double s = std::sqrt(2.0 * variances(i));
            const double hi = (kPi / 2.0 - means(i)) / s;
            const double lo = (-kPi / 2.0 - means(i)) / s;
            m += weights(i) * 0.5 * (std::erf(hi) - std::erf(lo));
        }
        return m;
    }

    /// Mass the same mixture would place on the domain with every mean moved
    /// to zero; the achievable ceiling given the component widths.
    double mass_on_domain_if_centered() const {
        double m = 0.0;
        for (Eigen::Index i = 0; i < weights.size(); ++i)
            m += weights(i) * std::erf(kPi / (2.0 * std::sqrt(2.0 * variances(i))));
        return m;
    }
};

/// Pointwise mixture density on the grid, renormalized so the Riemann sum is
/// exactly one (truncation to the angle domain).
inline GriddedPdf discretize_mixture(const GaussianMixture& mix, const AngleGrid& grid) {
    mix.validate();
    // Truncation dominates when the domain sees far less mass than the
    // component widths allow, i.e. the means sit far outside [-pi/2, pi/2).
    // The ratio (rather than the raw mass) keeps very wide, centered
    // components valid: they renormalize to a near-uniform density.
    if (mix.mass_on_domain() < 0.5 * mix.mass_on_domain_if_centered())
        throw std::invalid_argument(
            "discretize_mixture: truncation dominates the density "
            "(mixture means lie far outside [-pi/2, pi/2))");
    GriddedPdf pdf;
    pdf.density.resize(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) pdf.density(k) = mix.density(grid.points(k));
    pdf.density /= pdf.density.sum() * grid.spacing;
    return pdf;
}

/// Discretized perturbation energy: sum of e_k^2 * spacing.
inline double error_energy(const Eigen::VectorXd& e, const AngleGrid& grid) {
    return e.squaredNorm() * grid.spacing;
}

/// Discretized zero-integral residual: sum of e_k * spacing.
inline double error_integral(const Eigen::VectorXd& e, const AngleGrid& grid) {
    return e.sum() * grid.spacing;
}

/// How the evaluation sampler perturbs the nominal mixture: each nominal
/// component gets its weight, mean and variance jittered, and one extra
/// roaming component sweeps the domain. Magnitudes below are the documented
/// defaults; the uncertainty radius caps the final perturbation by convex
/// shrinkage toward the nominal PDF.
struct PerturbationScheme {
    GaussianMixture nominal;
    double mean_jitter = 0.15;        ///< radians, uniform half-width
    double log10_var_jitter = 0.35;   ///< decades, uniform half-width
    double weight_log_jitter = 0.4;   ///< nats, uniform half-width
    double roam_mean_span = 1.2;      ///< radians, roaming mean ~ U(-span, span)
    double roam_weight_max = 0.2;     ///< roaming weight ~ U(0.02, max)
};

namespace detail {

/// Deterministic standard normal (Box-Muller on mt19937_64); std library
/// normal_distribution is implementation-defined across platforms.
class NormalSampler {
public:
    explicit NormalSampler(std::mt19937_64& rng) : rng_(rng) {}
    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform_(); } while (u1 <= 0.0);
        const double u2 = uniform_();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }
    double uniform_() {
        return (static_cast<double>(rng_() >> 11)) * 0x1.0p-53;
    }

private:
    std::mt19937_64& rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    const double u = (static_cast<double>(rng() >> 11)) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

}  // namespace detail

/// Draw one admissible "real" PDF around p_bar: sample a perturbed mixture,
/// then shrink it toward p_bar (convex combination, bisection on the mixing
/// weight) until the perturbation energy fits inside the delta ball. Returns
/// the PDF together with its error vector e = p - p_bar.
inline std::pair<GriddedPdf, Eigen::VectorXd> sample_real_pdf(const GriddedPdf& p_bar,
                                                              const AngleGrid& grid,
                                                              double delta,
                                                              const PerturbationScheme& scheme,
                                                              std::mt19937_64& rng) {
    if (delta < 0.0) throw std::invalid_argument("sample_real_pdf: delta must be >= 0");
    if (delta == 0.0) return {p_bar, Eigen::VectorXd::Zero(grid.n_points)};

    const GaussianMixture& nominal = scheme.nominal;
    const Eigen::Index k_nominal = nominal.weights.size();
    const double clamp = std::min(1.0, delta);

    GaussianMixture cand;
    cand.weights.resize(k_nominal + 1);
    cand.means.resize(k_nominal + 1);
    cand.variances.resize(k_nominal + 1);
    for (Eigen::Index i = 0; i < k_nominal; ++i) {
        cand.means(i) = nominal.means(i) +
                        detail::uniform_in(rng, -scheme.mean_jitter, scheme.mean_jitter) * clamp;
        const double dlog = detail::uniform_in(rng, -scheme.log10_var_jitter, scheme.log10_var_jitter);
        cand.variances(i) = nominal.variances(i) * std::pow(10.0, dlog * clamp);
        cand.weights(i) = nominal.weights(i) *
                          std::exp(detail::uniform_in(rng, -scheme.weight_log_jitter,
                                                      scheme.weight_log_jitter) * clamp);
    }
    cand.means(k_nominal) = detail::uniform_in(rng, -scheme.roam_mean_span, scheme.roam_mean_span);
    cand.variances(k_nominal) = std::pow(10.0, detail::uniform_in(rng, -3.0, -2.0));
    cand.weights(k_nominal) = detail::uniform_in(rng, 0.02, scheme.roam_weight_max) * clamp;
    cand.weights /= cand.weights.sum();

    const GriddedPdf p_cand = discretize_mixture(cand, grid);
    const Eigen::VectorXd e_full = p_cand.density - p_bar.density;
    const double delta_sq = delta * delta;

    auto energy_at = [&](double s) { return s * s * error_energy(e_full, grid); };

    double s = 1.0;
    if (energy_at(1.0) > delta_sq) {
        // largest s with energy in [0.99, 1] * delta^2
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double en = energy_at(mid);
            if (en > delta_sq) {
                hi = mid;
            } else if (en < 0.99 * delta_sq) {
                lo = mid;
            } else {
                lo = mid;
                break;
            }
        }
        s = lo;
    }

    GriddedPdf out;
    out.density = (1.0 - s) * p_bar.density + s * p_cand.density;
    return {out, out.density - p_bar.density};
}

/// Two-column CSV (theta_radians, density).
inline void write_pdf_csv(const std::string& path, const AngleGrid& grid, const GriddedPdf& pdf) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_pdf_csv: cannot open " + path);
    out << "theta_radians,density\n";
    out.precision(17);
    for (int k = 0; k < grid.n_points; ++k)
        out << grid.points(k) << ',' << pdf.density(k) << '\n';
}

/// Reads a PDF written by write_pdf_csv; the grid is reconstructed from the
/// row count and validated against the stored angles.
inline std::pair<AngleGrid, GriddedPdf> read_pdf_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_pdf_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_pdf_csv: empty file " + path);
    std::vector<double> thetas, densities;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("read_pdf_csv: bad row");
        thetas.push_back(std::stod(cell));
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("read_pdf_csv: bad row");
        densities.push_back(std::stod(cell));
    }
    AngleGrid grid = make_angle_grid(static_cast<int>(thetas.size()));
    for (size_t k = 0; k < thetas.size(); ++k)
        if (std::abs(grid.points(static_cast<int>(k)) - thetas[k]) > 1e-9)
            throw std::runtime_error("read_pdf_csv: angles are not a midpoint grid");
    GriddedPdf pdf;
    pdf.density = Eigen::Map<Eigen::VectorXd>(densities.data(), static_cast<Eigen::Index>(densities.size()));
    return {grid, pdf};
}

}  // namespace pcrbeam
