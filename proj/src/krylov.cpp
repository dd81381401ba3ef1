#include "autoamg/krylov.hpp"

#include <chrono>
#include <cmath>

namespace autoamg {

std::pair<Vector, SolveReport> gmres(const CsrMatrix& a, std::span<const double> b,
                                     const Hierarchy* precond, const GmresParams& params)
{
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = a.n_rows;
    if (!a.square() || b.size() != n) throw Error("gmres: dimension mismatch");
    if (!(params.tol > 0.0)) throw Error("gmres: tol must be positive");
    if (params.restart < 1) throw Error("gmres: restart must be >= 1");
    if (precond && precond->levels.front().a.n_rows != n) {
        throw Error("gmres: preconditioner size mismatch");
    }

    SolveReport report;
    Vector x(n, 0.0);
    auto finish = [&] {
        report.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return std::pair<Vector, SolveReport>{std::move(x), std::move(report)};
    };

    const double nb = norm2(b);
    if (nb == 0.0) {
        report.converged = true;
        return finish();
    }

    const std::size_t m = params.restart;
    std::vector<Vector> basis(m + 1, Vector(n));
    std::vector<double> hess((m + 1) * m, 0.0);  // column-major, (m+1) x m
    auto H = [&](std::size_t i, std::size_t j) -> double& { return hess[j * (m + 1) + i]; };
    std::vector<double> cs(m), sn(m), g(m + 1), y(m);
    Vector z(n), w(n), u(n), r(b.begin(), b.end());
    double beta = nb;

    while (report.iterations < params.max_iter) {
        for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        const std::size_t budget = std::min(m, params.max_iter - report.iterations);
        std::size_t k = 0;
        while (k < budget) {
            const std::size_t j = k;
            if (precond) {
                std::fill(z.begin(), z.end(), 0.0);
                vcycle_inplace(*precond, basis[j], z);
                spmv(a, z, w);
            } else {
                spmv(a, basis[j], w);
            }
            for (std::size_t i = 0; i <= j; ++i) {
                const double hij = dot(w, basis[i]);
                H(i, j) = hij;
                const auto& vi = basis[i];
                for (std::size_t q = 0; q < n; ++q) w[q] -= hij * vi[q];
            }
            const double h_next = norm2(w);
            H(j + 1, j) = h_next;

            for (std::size_t i = 0; i < j; ++i) {
                const double t1 = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                const double t2 = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t1;
                H(i + 1, j) = t2;
            }
            const double den = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = den == 0.0 ? 1.0 : H(j, j) / den;
            sn[j] = den == 0.0 ? 0.0 : H(j + 1, j) / den;
            H(j, j) = den;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            ++k;
            ++report.iterations;
            const double est = std::abs(g[j + 1]) / nb;
            report.relative_residuals.push_back(est);

            if (h_next < 1e-300) break;  // Krylov space exhausted
            for (std::size_t q = 0; q < n; ++q) basis[j + 1][q] = w[q] / h_next;
            if (est < params.tol) break;
        }

        // Back substitution on the rotated Hessenberg system.
        for (std::size_t i = k; i-- > 0;) {
            double s = g[i];
            for (std::size_t l = i + 1; l < k; ++l) s -= H(i, l) * y[l];
            y[i] = H(i, i) == 0.0 ? 0.0 : s / H(i, i);
        }
        std::fill(u.begin(), u.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            const auto& vi = basis[i];
            for (std::size_t q = 0; q < n; ++q) u[q] += y[i] * vi[q];
        }
        if (precond) {
            std::fill(z.begin(), z.end(), 0.0);
            vcycle_inplace(*precond, u, z);
            for (std::size_t q = 0; q < n; ++q) x[q] += z[q];
        } else {
            for (std::size_t q = 0; q < n; ++q) x[q] += u[q];
        }

        spmv(a, x, r);
        for (std::size_t q = 0; q < n; ++q) r[q] = b[q] - r[q];
        beta = norm2(r);
        report.final_relative_residual = beta / nb;
        if (report.final_relative_residual < params.tol) {
            report.converged = true;
            break;
        }
        if (!std::isfinite(beta)) {
            report.iterations = params.max_iter;
            break;
        }
    }
    return finish();
}

}  // namespace autoamg
