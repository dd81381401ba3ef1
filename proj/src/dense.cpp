#include "autoamg/dense.hpp"

#include <cmath>
#include <utility>

namespace autoamg {

DenseLu::DenseLu(const CsrMatrix& a) : n_(a.n_rows), lu_(to_dense(a))
{
    if (!a.square()) throw Error("DenseLu: matrix must be square");
    factor();
}

DenseLu::DenseLu(std::size_t n, std::vector<double> row_major)
    : n_(n), lu_(std::move(row_major))
{
    if (lu_.size() != n * n) throw Error("DenseLu: size mismatch");
    factor();
}

void DenseLu::factor()
{
    perm_.resize(n_);
    double scale = 0.0;
    for (double v : lu_) scale = std::max(scale, std::abs(v));
    const double tiny = scale * 1e-15;
    for (std::size_t k = 0; k < n_; ++k) {
        std::size_t piv = k;
        double best = std::abs(lu_[k * n_ + k]);
        for (std::size_t i = k + 1; i < n_; ++i) {
            double v = std::abs(lu_[i * n_ + k]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (!(best > tiny)) {
            throw Error("DenseLu: singular matrix (pivot " + std::to_string(k) + ")");
        }
        perm_[k] = piv;
        if (piv != k) {
            for (std::size_t j = 0; j < n_; ++j) std::swap(lu_[k * n_ + j], lu_[piv * n_ + j]);
        }
        const double inv = 1.0 / lu_[k * n_ + k];
        for (std::size_t i = k + 1; i < n_; ++i) {
            double& lik = lu_[i * n_ + k];
            if (lik == 0.0) continue;
            lik *= inv;
            const double* rk = &lu_[k * n_];
            double* ri = &lu_[i * n_];
            for (std::size_t j = k + 1; j < n_; ++j) ri[j] -= lik * rk[j];
        }
    }
}

void DenseLu::solve(std::span<double> b) const
{
    if (b.size() != n_) throw Error("DenseLu::solve: dimension mismatch");
    for (std::size_t k = 0; k < n_; ++k) {
        if (perm_[k] != k) std::swap(b[k], b[perm_[k]]);
    }
    for (std::size_t i = 0; i < n_; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= lu_[i * n_ + j] * b[j];
        b[i] = s;
    }
    for (std::size_t i = n_; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n_; ++j) s -= lu_[i * n_ + j] * b[j];
        b[i] = s / lu_[i * n_ + i];
    }
}

}  // namespace autoamg
