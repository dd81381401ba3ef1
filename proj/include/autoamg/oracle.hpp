#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autoamg/amg.hpp"
#include "autoamg/krylov.hpp"
#include "autoamg/problems.hpp"

namespace autoamg {

/// 0.01, 0.02, ..., 0.99.
std::vector<double> theta_grid();

inline constexpr double kDefaultThetas[] = {0.25, 0.5};

struct SolverParams {
    GmresParams gmres;
    /// theta and seed are overwritten per solve.
    AmgParams amg;
};

struct SolveOutcome {
    std::size_t iterations = 0;
    bool converged = false;
    bool setup_failed = false;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    double time_seconds() const { return setup_seconds + solve_seconds; }
};

/// AMG(theta) setup plus preconditioned GMRES. Failures and non-convergence
/// count as max_iter iterations.
SolveOutcome solve_at_theta(const CsrMatrix& a, std::span<const double> b, double theta,
                            std::uint64_t pmis_seed, const SolverParams& params);

/// PMIS seed used for every solve of the matrix called `matrix_id`.
std::uint64_t pmis_seed_for(std::string_view matrix_id);

struct GridPoint {
    double theta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double time_seconds = 0.0;
};

struct ThetaRecord {
    std::string matrix_id;
    std::vector<GridPoint> grid;  // sorted by theta
    double theta_opt = 0.0;
    std::size_t iters_min = 0;
    std::size_t iters_max = 0;
    double theta_at_max = 0.0;

    /// Iterations at `theta` if it is a grid point.
    std::optional<std::size_t> iterations_at(double theta) const;
    /// Sorts the grid and recomputes the summary fields (smallest theta wins ties).
    void summarize();
};

ThetaRecord grid_search(const CsrMatrix& a, std::span<const double> b,
                        std::string_view matrix_id, std::span<const double> grid,
                        const SolverParams& params, std::size_t threads = 1);

/// matrix_id,theta,iterations,converged,time_seconds
std::string grid_csv(const ThetaRecord& r);
/// The grid rows followed by one summary row.
std::string sensitivity_report(const ThetaRecord& r);
ThetaRecord parse_sensitivity_report(std::string_view csv);
/// {matrix_id, theta_opt, iters_min, iters_max, theta_at_max, defaults}
nlohmann::json summary_json(const ThetaRecord& r);

struct BoundaryPoint {
    double theta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double factor_theoretical = 0.0;
    bool theoretical_converged = true;
    double factor_computed = 0.0;
};

struct BoundaryExperiment {
    CsrMatrix matrix;
    std::vector<BoundaryPoint> points;
    /// Left end of the adjacent grid pair with the largest iteration ratio.
    double theta_star = 0.0;
    double jump_ratio = 1.0;
};

struct BoundaryParams {
    double tol = 1e-8;
    std::size_t max_iter = 500;
    std::size_t factor_iterations = 100;
    std::size_t max_size = 400;
};

/// Boundary matrix of the generated problem, swept over the theta grid with
/// the stationary two-grid method.
BoundaryExperiment boundary_sensitivity_experiment(const DiffusionSpec& spec, double delta,
                                                   const BoundaryParams& params = {},
                                                   std::size_t threads = 1);

/// theta,iterations,converged,factor_theoretical,theoretical_converged,factor_computed
std::string boundary_csv(const BoundaryExperiment& e);

}  // namespace autoamg
