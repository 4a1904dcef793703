#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "pcrbeam/robust_opt.hpp"

namespace pcrbeam {

enum class Scheme { robust, nominal, enumeration };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::robust: return "robust";
        case Scheme::nominal: return "nominal";
        case Scheme::enumeration: return "enumeration";
    }
    return "unknown";
}

inline Scheme scheme_from_string(const std::string& name) {
    if (name == "robust") return Scheme::robust;
    if (name == "nominal") return Scheme::nominal;
    if (name == "enumeration") return Scheme::enumeration;
    throw std::invalid_argument("unknown scheme: " + name);
}

/// Everything one experiment run needs; loads from and saves to JSON.
struct ExperimentConfig {
    RadarScene scene;
    double power_dbm = 30.0;
    double noise_dbm = -90.0;
    GaussianMixture nominal_mixture;
    double delta_theta = kPi / 128.0;
    std::vector<double> deltas = {0.0, 0.4, 0.8, 1.2, 1.6, 2.0};
    int eval_samples = 1000;
    int enumeration_samples = 200;
    bool boundary_samples = false;
    std::uint64_t seed = 20250815;
    std::string output_dir = "results";
    std::vector<Scheme> schemes = {Scheme::robust, Scheme::nominal};

    void validate() const {
        scene.validate();
        nominal_mixture.validate();
        if (!std::is_sorted(deltas.begin(), deltas.end()))
            throw std::invalid_argument("ExperimentConfig: deltas must be sorted ascending");
        if (!deltas.empty() && deltas.front() < 0.0)
            throw std::invalid_argument("ExperimentConfig: deltas must be >= 0");
        if (eval_samples < 1)
            throw std::invalid_argument("ExperimentConfig: eval_samples must be >= 1");
        if (enumeration_samples < 1)
            throw std::invalid_argument("ExperimentConfig: enumeration_samples must be >= 1");
        const double cells = kPi / delta_theta;
        if (!(delta_theta > 0.0) || std::abs(cells - std::llround(cells)) > 1e-6 * cells)
            throw std::invalid_argument(
                "ExperimentConfig: delta_theta must divide pi into an integer grid");
        if (schemes.empty()) throw std::invalid_argument("ExperimentConfig: no schemes selected");
    }

    AngleGrid grid() const { return make_angle_grid_from_spacing(delta_theta); }
};

/// Reference setup: two-peak mixture prior, 10x12 ULA, 30 dBm budget over
/// -90 dBm noise, desk-scale 128-point grid.
inline ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.scene.n_tx = 10;
    cfg.scene.n_rx = 12;
    cfg.power_dbm = 30.0;
    cfg.noise_dbm = -90.0;
    cfg.scene.power_budget = dbm_to_watts(cfg.power_dbm);
    cfg.scene.noise_power = dbm_to_watts(cfg.noise_dbm);
    cfg.scene.n_samples = 25;
    cfg.scene.gamma = 2e-14;
    cfg.scene.alpha_variance = 2e-14;
    cfg.nominal_mixture.weights = Eigen::Vector2d(0.6, 0.4);
    cfg.nominal_mixture.means = Eigen::Vector2d(-0.7, 0.7);
    cfg.nominal_mixture.variances = Eigen::Vector2d(1e-3, std::pow(10.0, -2.8));
    return cfg;
}

namespace detail {

inline std::vector<double> json_doubles(const nlohmann::json& j, const std::string& field) {
    if (!j.contains(field))
        throw std::invalid_argument("config: missing field '" + field + "'");
    return j.at(field).get<std::vector<double>>();
}

template <typename T>
T json_get(const nlohmann::json& j, const std::string& field) {
    if (!j.contains(field))
        throw std::invalid_argument("config: missing field '" + field + "'");
    return j.at(field).get<T>();
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_vector(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["scene"] = {{"n_tx", cfg.scene.n_tx},
                  {"n_rx", cfg.scene.n_rx},
                  {"power_dbm", cfg.power_dbm},
                  {"noise_dbm", cfg.noise_dbm},
                  {"n_samples", cfg.scene.n_samples},
                  {"gamma", cfg.scene.gamma},
                  {"alpha_variance", cfg.scene.alpha_variance}};
    j["nominal_mixture"] = {{"weights", detail::from_vector(cfg.nominal_mixture.weights)},
                            {"means", detail::from_vector(cfg.nominal_mixture.means)},
                            {"variances", detail::from_vector(cfg.nominal_mixture.variances)}};
    j["delta_theta"] = cfg.delta_theta;
    j["deltas"] = cfg.deltas;
    j["eval_samples"] = cfg.eval_samples;
    j["enumeration_samples"] = cfg.enumeration_samples;
    j["boundary_samples"] = cfg.boundary_samples;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    std::vector<std::string> names;
    for (const Scheme s : cfg.schemes) names.emplace_back(to_string(s));
    j["schemes"] = names;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        const auto& scene = j.at("scene");
        cfg.scene.n_tx = detail::json_get<int>(scene, "n_tx");
        cfg.scene.n_rx = detail::json_get<int>(scene, "n_rx");
        cfg.power_dbm = detail::json_get<double>(scene, "power_dbm");
        cfg.noise_dbm = detail::json_get<double>(scene, "noise_dbm");
        cfg.scene.power_budget = dbm_to_watts(cfg.power_dbm);
        cfg.scene.noise_power = dbm_to_watts(cfg.noise_dbm);
        cfg.scene.n_samples = detail::json_get<int>(scene, "n_samples");
        cfg.scene.gamma = detail::json_get<double>(scene, "gamma");
        cfg.scene.alpha_variance = detail::json_get<double>(scene, "alpha_variance");

        const auto& mix = j.at("nominal_mixture");
        cfg.nominal_mixture.weights = detail::to_vector(detail::json_doubles(mix, "weights"));
        cfg.nominal_mixture.means = detail::to_vector(detail::json_doubles(mix, "means"));
        cfg.nominal_mixture.variances = detail::to_vector(detail::json_doubles(mix, "variances"));

        cfg.delta_theta = detail::json_get<double>(j, "delta_theta");
        cfg.deltas = detail::json_doubles(j, "deltas");
        cfg.eval_samples = detail::json_get<int>(j, "eval_samples");
        cfg.enumeration_samples = detail::json_get<int>(j, "enumeration_samples");
        cfg.boundary_samples = detail::json_get<bool>(j, "boundary_samples");
        cfg.seed = detail::json_get<std::uint64_t>(j, "seed");
        cfg.output_dir = detail::json_get<std::string>(j, "output_dir");
        cfg.schemes.clear();
        for (const auto& name : detail::json_get<std::vector<std::string>>(j, "schemes"))
            cfg.schemes.push_back(scheme_from_string(name));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_config: cannot open " + path);
    out << config_to_json(cfg).dump(2) << '\n';
}

/// One (delta, scheme) cell of a sweep.
struct SweepRecord {
    double delta = 0.0;
    Scheme scheme = Scheme::robust;
    double t_star = 0.0;        ///< solver objective
    double pcrb_star = 0.0;     ///< 1 / t_star
    double pcrb_model = 0.0;    ///< trust-region worst case at the returned W
    double pcrb_sampled = 0.0;  ///< worst case over the evaluation PDFs
    double seconds = 0.0;
    sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
};

/// Angular power distribution a^H(theta) W a(theta) over the grid.
inline Eigen::VectorXd beampattern(const TransmitCovariance& w, const AngleGrid& grid,
                                   const RadarScene& scene) {
    Eigen::VectorXd pattern(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) {
        const Eigen::VectorXcd a = steering(grid.points(k), scene).a;
        pattern(k) = std::max(0.0, (a.adjoint() * w.w * a)(0).real());
    }
    return pattern;
}

namespace detail {

/// Per-purpose RNG streams fanned out from the root seed, so adding a scheme
/// or a delta never shifts another cell's randomness.
inline std::uint64_t substream(std::uint64_t root, std::uint64_t purpose, std::uint64_t index) {
    std::seed_seq seq{root, purpose, index};
    std::uint64_t out[2];
    seq.generate(out, out + 2);
    return (out[0] << 32) ^ out[1];
}

inline std::string git_revision() {
    std::FILE* pipe = ::popen("git rev-parse --short HEAD 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[64] = {0};
    std::string rev = std::fgets(buf, sizeof(buf), pipe) ? buf : "unknown";
    ::pclose(pipe);
    while (!rev.empty() && (rev.back() == '\n' || rev.back() == '\r')) rev.pop_back();
    return rev.empty() ? "unknown" : rev;
}

inline RobustSolution solve_scheme(Scheme scheme, const QuadraticPcrbModel& model,
                                   const RadarScene& scene, const PerturbationScheme& perturb,
                                   int enum_count, bool boundary, std::uint64_t enum_seed,
                                   const sdp::Settings& settings) {
    switch (scheme) {
        case Scheme::robust: return solve_robust(model, scene, settings);
        case Scheme::nominal: return solve_nominal(model, scene);
        case Scheme::enumeration: {
            std::vector<Eigen::VectorXd> samples;
            samples.emplace_back(Eigen::VectorXd::Zero(model.grid.n_points));
            if (model.delta > 0.0) {
                auto drawn = generate_error_samples(model.p_bar, model.grid, model.delta, perturb,
                                                    enum_count - 1, enum_seed, boundary);
                for (auto& e : drawn) samples.push_back(std::move(e));
            }
            return solve_enumeration(model, scene, samples, settings);
        }
    }
    throw std::logic_error("solve_scheme: unreachable");
}

}  // namespace detail

/// Worst-case PCRB of every configured scheme at every uncertainty radius,
/// evaluated both by the exact trust-region oracle and over a shared set of
/// sampled real PDFs. Cells run in parallel; any solve failure is recorded
/// in its row and the sweep continues.
inline std::vector<SweepRecord> run_delta_sweep(const ExperimentConfig& cfg,
                                                const sdp::Settings& settings = {}) {
    cfg.validate();
    const AngleGrid grid = cfg.grid();
    const GriddedPdf p_bar = discretize_mixture(cfg.nominal_mixture, grid);
    const auto gains = gain_matrices(grid, cfg.scene);
    PerturbationScheme perturb;
    perturb.nominal = cfg.nominal_mixture;

    const auto run_cell = [&](double delta, Scheme scheme,
                              std::uint64_t delta_index) -> SweepRecord {
        SweepRecord rec;
        rec.delta = delta;
        rec.scheme = scheme;
        try {
            const auto model = build_quadratic_model(p_bar, grid, gains, cfg.scene, delta);
            const auto t0 = std::chrono::steady_clock::now();
            const RobustSolution sol = detail::solve_scheme(
                scheme, model, cfg.scene, perturb, cfg.enumeration_samples, cfg.boundary_samples,
                detail::substream(cfg.seed, 1, delta_index), settings);
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.status = sol.status;
            rec.t_star = sol.t_star;
            rec.pcrb_star = sol.pcrb_star;
            rec.pcrb_model = trust_region_worst_case(model, sol.w_star).pcrb;

            std::mt19937_64 rng(detail::substream(cfg.seed, 0, delta_index));
            std::vector<GriddedPdf> eval_pdfs;
            eval_pdfs.reserve(static_cast<size_t>(cfg.eval_samples));
            for (int i = 0; i < cfg.eval_samples; ++i)
                eval_pdfs.push_back(sample_real_pdf(p_bar, grid, delta, perturb, rng).first);
            rec.pcrb_sampled =
                worst_case_pcrb_sampled(sol.w_star, eval_pdfs, gains, grid, cfg.scene).first.value;
        } catch (const std::exception&) {
            rec.status = sdp::SolveStatus::numerical_failure;
        }
        return rec;
    };

    std::vector<std::future<SweepRecord>> cells;
    for (size_t d = 0; d < cfg.deltas.size(); ++d)
        for (const Scheme scheme : cfg.schemes)
            cells.push_back(std::async(std::launch::async, run_cell, cfg.deltas[d], scheme,
                                       static_cast<std::uint64_t>(d)));

    std::vector<SweepRecord> records;
    records.reserve(cells.size());
    for (auto& cell : cells) records.push_back(cell.get());
    return records;
}

/// Wall-clock comparison of the robust solve against the enumeration
/// benchmark at one radius. Reports the measured times and their ratio; any
/// assertion about ordering belongs to the caller.
struct TimingReport {
    double delta = 0.0;
    int enumeration_samples = 0;
    double robust_seconds = 0.0;
    double enumeration_seconds = 0.0;
    double ratio = 0.0;  ///< enumeration / robust
    sdp::SolveStatus robust_status = sdp::SolveStatus::numerical_failure;
    sdp::SolveStatus enumeration_status = sdp::SolveStatus::numerical_failure;
};

inline TimingReport run_timing_comparison(const ExperimentConfig& cfg, double delta,
                                          int enumeration_samples,
                                          const sdp::Settings& settings = {}) {
    cfg.validate();
    const AngleGrid grid = cfg.grid();
    const GriddedPdf p_bar = discretize_mixture(cfg.nominal_mixture, grid);
    const auto gains = gain_matrices(grid, cfg.scene);
    const auto model = build_quadratic_model(p_bar, grid, gains, cfg.scene, delta);
    PerturbationScheme perturb;
    perturb.nominal = cfg.nominal_mixture;

    TimingReport report;
    report.delta = delta;
    report.enumeration_samples = enumeration_samples;

    auto t0 = std::chrono::steady_clock::now();
    const RobustSolution robust = solve_robust(model, cfg.scene, settings);
    report.robust_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.robust_status = robust.status;

    // Scheme cost includes drawing its samples, which is part of what the
    // enumeration benchmark has to do.
    t0 = std::chrono::steady_clock::now();
    const RobustSolution enumerated = detail::solve_scheme(
        Scheme::enumeration, model, cfg.scene, perturb, enumeration_samples,
        cfg.boundary_samples, detail::substream(cfg.seed, 2, 0), settings);
    report.enumeration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.enumeration_status = enumerated.status;
    report.ratio = report.enumeration_seconds / std::max(report.robust_seconds, 1e-12);
    return report;
}

inline void persist_results(const std::vector<SweepRecord>& records,
                            const ExperimentConfig& cfg, const std::string& dir,
                            const sdp::Settings& settings = {}) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/sweep.csv");
        if (!out) throw std::runtime_error("persist_results: cannot open " + dir + "/sweep.csv");
        out.precision(17);
        out << "delta,scheme,pcrb_model,pcrb_sampled,seconds,status\n";
        for (const auto& rec : records)
            out << rec.delta << ',' << to_string(rec.scheme) << ',' << rec.pcrb_model << ','
                << rec.pcrb_sampled << ',' << rec.seconds << ',' << sdp::to_string(rec.status)
                << '\n';
    }
    {
        std::ofstream out(dir + "/run_manifest.txt");
        out << "pcrbeam sweep manifest\n";
        out << "git_revision: " << detail::git_revision() << '\n';
        out << "seed: " << cfg.seed << '\n';
        out << "solver_feasibility_tol: " << settings.feasibility_tol << '\n';
        out << "solver_gap_tol: " << settings.gap_tol << '\n';
        out << "config: " << config_to_json(cfg).dump() << '\n';
    }
}

/// Pattern CSV with the nominal density and the scheme's worst-case density
/// overlaid, for external plotting.
inline void write_beampattern_csv(const std::string& path, const AngleGrid& grid,
                                  const Eigen::VectorXd& pattern, const GriddedPdf& p_bar,
                                  const Eigen::VectorXd& worst_density) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_beampattern_csv: cannot open " + path);
    out.precision(17);
    out << "theta_radians,pattern,pbar_density,worstcase_density\n";
    for (int k = 0; k < grid.n_points; ++k)
        out << grid.points(k) << ',' << pattern(k) << ',' << p_bar.density(k) << ','
            << worst_density(k) << '\n';
}

}  // namespace pcrbeam
