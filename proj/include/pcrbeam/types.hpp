#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace pcrbeam {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Density floor applied before any division by a gridded PDF. Gaussian
/// mixture tails underflow double precision well inside the angle domain;
/// every consumer that divides by a density clamps to this value first.
inline constexpr double kDensityFloor = 1e-12;

/// Physical constants of one monostatic MIMO radar setup. Angles are in
/// radians, powers in watts, everything else dimensionless.
struct RadarScene {
    int n_tx = 1;            ///< transmit antennas
    int n_rx = 1;            ///< receive antennas
    double power_budget = 1.0;   ///< transmit power budget [W]
    double noise_power = 1.0;    ///< receiver noise power [W]
    int n_samples = 2;       ///< probing samples per dwell
    double gamma = 1.0;      ///< second moment of the complex reflection coefficient
    double alpha_variance = 1.0; ///< variance of the zero-mean CSCG reflection coefficient

    void validate() const {
        if (n_tx < 1) throw std::invalid_argument("RadarScene: n_tx must be >= 1");
        if (n_rx < 1) throw std::invalid_argument("RadarScene: n_rx must be >= 1");
        if (!(power_budget > 0.0)) throw std::invalid_argument("RadarScene: power_budget must be > 0");
        if (!(noise_power > 0.0)) throw std::invalid_argument("RadarScene: noise_power must be > 0");
        if (n_samples < 2) throw std::invalid_argument("RadarScene: n_samples must be >= 2");
        if (!(gamma > 0.0)) throw std::invalid_argument("RadarScene: gamma must be > 0");
        if (!(alpha_variance > 0.0)) throw std::invalid_argument("RadarScene: alpha_variance must be > 0");
    }
};

/// dBm -> watts.
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Real part of tr(A*B) for square matrices of matching size.
inline double real_trace_product(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a.transpose().cwiseProduct(b)).sum().real();
}

inline double real_trace_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace pcrbeam
