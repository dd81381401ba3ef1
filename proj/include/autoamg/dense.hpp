#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "autoamg/sparse.hpp"

namespace autoamg {

/// LU factorisation with partial pivoting of a small dense matrix.
class DenseLu {
public:
    DenseLu() = default;
    /// Throws Error when a pivot vanishes relative to the largest entry.
    explicit DenseLu(const CsrMatrix& a);
    DenseLu(std::size_t n, std::vector<double> row_major);

    std::size_t size() const { return n_; }
    /// Overwrites b with A^{-1} b.
    void solve(std::span<double> b) const;

private:
    void factor();

    std::size_t n_ = 0;
    std::vector<double> lu_;
    std::vector<std::size_t> perm_;
};

}  // namespace autoamg
