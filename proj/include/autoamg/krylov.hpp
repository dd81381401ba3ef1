#pragma once

#include <span>
#include <utility>
#include <vector>

#include "autoamg/amg.hpp"
#include "autoamg/sparse.hpp"

namespace autoamg {

struct GmresParams {
    double tol = 1e-8;
    std::size_t max_iter = 500;
    std::size_t restart = 30;
};

struct SolveReport {
    /// Inner (Arnoldi) iterations over all restart cycles.
    std::size_t iterations = 0;
    bool converged = false;
    /// Least-squares residual estimate after every iteration, relative to ||b||.
    std::vector<double> relative_residuals;
    /// True relative residual at exit.
    double final_relative_residual = 0.0;
    double elapsed_seconds = 0.0;
};

/// Right-preconditioned restarted GMRES from x0 = 0 with modified
/// Gram-Schmidt and Givens rotations. The preconditioner, when given, is one
/// V-cycle from a zero initial guess. Convergence is only reported after the
/// true residual ||b - Ax|| / ||b|| has been recomputed below tol.
std::pair<Vector, SolveReport> gmres(const CsrMatrix& a, std::span<const double> b,
                                     const Hierarchy* precond, const GmresParams& params);

}  // namespace autoamg
