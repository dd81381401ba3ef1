#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "autoamg/dense.hpp"
#include "autoamg/sparse.hpp"

namespace autoamg {

/// Boolean CSR pattern.
struct Pattern {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col_idx;

    std::size_t row_size(std::size_t i) const { return row_ptr[i + 1] - row_ptr[i]; }
    std::span<const std::size_t> row(std::size_t i) const
    {
        return {col_idx.data() + row_ptr[i], row_size(i)};
    }
    bool contains(std::size_t i, std::size_t j) const;
    bool operator==(const Pattern&) const = default;
};

Pattern transpose(const Pattern& p);

/// Row i of `strong` lists S_i, the columns i strongly depends on; row i of
/// `strong_transpose` lists S_i^T, the points that strongly depend on i.
struct StrengthGraph {
    std::size_t n = 0;
    Pattern strong;
    Pattern strong_transpose;
};

/// j is in S_i iff a_ij != 0 and |a_ij| >= theta * max_{k != i} |a_ik|.
StrengthGraph strength_graph(const CsrMatrix& a, double theta);

enum class Point : std::uint8_t { F, C };

struct CfSplitting {
    std::vector<Point> labels;

    std::size_t num_coarse() const;
    /// Coarse index of every C point; F points map to SIZE_MAX.
    std::vector<std::size_t> coarse_index() const;
};

/// PMIS with measure |S_i^T| + u_i, u_i uniform in [0, 1) drawn from `seed`.
CfSplitting pmis_coarsen(const StrengthGraph& s, std::uint64_t seed);

/// PMIS with caller-supplied measures. Ties are broken by the larger index.
/// Nodes without any strong edge are F. Every round selects the undecided
/// nodes that beat all undecided neighbours of the symmetrised graph and
/// marks their undecided neighbours F.
CfSplitting pmis_coarsen(const StrengthGraph& s, std::span<const double> measures);

/// Classical direct interpolation from the strong C neighbours of each F
/// point. F points without strong C neighbours get a zero row.
CsrMatrix direct_interpolation(const CsrMatrix& a, const StrengthGraph& s,
                               const CfSplitting& split);

/// P^T A P via two row-wise sparse products. Cancellation zeros are kept.
CsrMatrix galerkin(const CsrMatrix& a, const CsrMatrix& p);

struct AmgParams {
    double theta = 0.25;
    std::size_t max_levels = 25;
    std::size_t coarse_size_limit = 64;
    int pre_sweeps = 1;
    int post_sweeps = 1;
    std::uint64_t seed = 0;
    /// Coarsest operators larger than this are rejected instead of factorised.
    std::size_t max_dense_size = 5000;
};

struct Level {
    CsrMatrix a;
    CsrMatrix p;  // empty on the coarsest level
    CsrMatrix r;
    CfSplitting splitting;
    Vector inv_diag;
};

struct Hierarchy {
    std::vector<Level> levels;
    DenseLu coarsest;
    AmgParams params;

    std::size_t num_levels() const { return levels.size(); }
    double operator_complexity() const;
    nlohmann::json stats() const;
};

/// Builds a hierarchy from prepared levels (A and P on every non-coarsest
/// level). Fills R = P^T, smoother data and the coarsest factorisation.
Hierarchy assemble_hierarchy(std::vector<Level> levels, const AmgParams& params);

Hierarchy setup(const CsrMatrix& a, const AmgParams& params);

/// One V-cycle for A x = b starting from x: forward Gauss-Seidel before and
/// backward Gauss-Seidel after each coarse-grid correction.
Vector vcycle(const Hierarchy& h, std::span<const double> b, std::span<const double> x);
void vcycle_inplace(const Hierarchy& h, std::span<const double> b, std::span<double> x);

struct FactorEstimate {
    double value = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

/// Spectral radius of the two-grid error propagator by matrix-free power
/// iteration on E v = vcycle(h, 0, v), using the 2-norm growth ratio.
FactorEstimate tg_convergence_factor_theoretical(const Hierarchy& h,
                                                 std::uint64_t seed = 1);

/// Observed asymptotic rate of the stationary iteration x <- vcycle(h, 0, x)
/// from a random start: geometric mean of the last ceil(iters/2) error-norm
/// ratios. With b = 0 the iterate is the error itself.
double tg_convergence_factor_computed(const Hierarchy& h, std::size_t iters,
                                      std::uint64_t seed = 2);

struct StationaryResult {
    std::size_t iterations = 0;
    bool converged = false;
};

/// Stationary multigrid iteration from x = 0 until ||b - Ax|| / ||b|| < tol.
StationaryResult stationary_solve(const Hierarchy& h, std::span<const double> b,
                                  double tol, std::size_t max_iter);

}  // namespace autoamg
