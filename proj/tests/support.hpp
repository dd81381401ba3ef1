#pragma once

// Dense reference implementations and random inputs shared by the tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "autoamg/problems.hpp"
#include "autoamg/rng.hpp"
#include "autoamg/sparse.hpp"

namespace support {

using autoamg::CsrMatrix;
using autoamg::Rng;
using autoamg::Triplet;
using autoamg::Vector;

struct Dense {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    explicit Dense(const CsrMatrix& a) : rows(a.n_rows), cols(a.n_cols), v(autoamg::to_dense(a)) {}

    double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

inline Dense matmul(const Dense& a, const Dense& b)
{
    Dense c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k)
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

inline Dense transposed(const Dense& a)
{
    Dense t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline Vector matvec(const Dense& a, const Vector& x)
{
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) y[i] += a(i, j) * x[j];
    return y;
}

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// max |a - b| / max |b|
inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    const double s = max_abs(b);
    return s == 0.0 ? d : d / s;
}

/// Symmetric eigenvalues by cyclic Jacobi rotations.
inline std::vector<double> sym_eigenvalues(Dense a)
{
    const std::size_t n = a.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Random rows x cols matrix; each position is stored with probability
/// `density`, values uniform in [-1, 1] times 10^(span * u).
inline CsrMatrix random_sparse(Rng& rng, std::size_t rows, std::size_t cols, double density,
                               double span = 0.0)
{
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (rng.uniform() < density) {
                double v = rng.uniform(-1.0, 1.0) * std::pow(10.0, span * rng.uniform());
                if (v == 0.0) v = 1.0;
                t.push_back({i, j, v});
            }
    return CsrMatrix::from_triplets(rows, cols, std::move(t));
}

/// Symmetric, weakly diagonally dominant with negative off-diagonals whose
/// magnitudes span `span` decades; positive definite thanks to a small shift.
inline CsrMatrix random_mmatrix(Rng& rng, std::size_t n, double density, double span = 0.0)
{
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < density) {
                const double v = -std::pow(10.0, span * rng.uniform());
                d[i * n + j] = d[j * n + i] = v;
            }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::abs(d[i * n + j]);
        d[i * n + i] = s + 0.1 * (s == 0.0 ? 1.0 : s);
    }
    return CsrMatrix::from_dense(n, n, d);
}

inline CsrMatrix poisson2d(std::size_t n)
{
    autoamg::DiffusionSpec s;
    s.dim = 2;
    s.nx = s.ny = n;
    s.M = 0;
    return autoamg::gen_diffusion(s).a;
}

inline CsrMatrix laplace1d(std::size_t n)
{
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) t.push_back({i, i - 1, -1.0});
        t.push_back({i, i, 2.0});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0});
    }
    return CsrMatrix::from_triplets(n, n, std::move(t));
}

inline Vector random_vector(Rng& rng, std::size_t n)
{
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag)
    {
        Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^
                static_cast<std::uint64_t>(std::filesystem::file_time_type::clock::now().time_since_epoch().count()));
        path = std::filesystem::temp_directory_path() / ("autoamg-" + tag + "-" + std::to_string(rng.next() % 1000000007));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace support
