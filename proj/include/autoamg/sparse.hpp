#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace autoamg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row. Explicit zeros
/// may be stored; they are structural entries but do not count as
/// couplings (a_ij != 0) in the strength or multiscale predicates.
struct CsrMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }
    bool square() const { return n_rows == n_cols; }

    /// Throws Error naming the first broken invariant.
    void validate() const;

    /// Index of (i, j) in col_idx/values, or nnz() when not stored.
    std::size_t find(std::size_t i, std::size_t j) const;
    double at(std::size_t i, std::size_t j) const;

    bool operator==(const CsrMatrix&) const = default;

    static CsrMatrix identity(std::size_t n);
    /// Builds from a row-major dense array, storing only nonzeros.
    static CsrMatrix from_dense(std::size_t n_rows, std::size_t n_cols,
                                std::span<const double> dense);
    /// Duplicate (row, col) pairs are an error.
    static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> entries);
};

/// Row-major dense copy.
std::vector<double> to_dense(const CsrMatrix& a);

/// y = A x, summed left to right within each row.
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
Vector spmv(const CsrMatrix& a, std::span<const double> x);

/// y = A^T x.
Vector spmv_transpose(const CsrMatrix& a, std::span<const double> x);

CsrMatrix transpose(const CsrMatrix& a);

bool structurally_symmetric(const CsrMatrix& a);
bool has_full_diagonal(const CsrMatrix& a);
Vector diagonal(const CsrMatrix& a);
CsrMatrix scaled(const CsrMatrix& a, double c);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

/// log10(max |a_ik| / min |a_ik|) over the nonzero off-diagonals of row i,
/// or nullopt when the row has fewer than two of them.
std::optional<double> row_log10_ratio(const CsrMatrix& a, std::size_t i);

struct MultiscaleReport {
    double delta = 0.0;
    std::vector<std::size_t> rows;
    double max_row_ratio_log10 = 0.0;

    bool multiscale() const { return !rows.empty(); }
};

MultiscaleReport multiscale_report(const CsrMatrix& a, double delta);
bool is_multiscale(const CsrMatrix& a, double delta);

/// Removes the off-diagonal entry of smallest magnitude (first in row-major
/// order on ties). On a structurally symmetric matrix the mirrored entry is
/// removed as well. The diagonal is never touched.
CsrMatrix drop_min_entry(const CsrMatrix& a);

}  // namespace autoamg
