#include "autoamg/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace autoamg {

void CsrMatrix::validate() const
{
    if (row_ptr.size() != n_rows + 1) {
        throw Error("csr: row_ptr length " + std::to_string(row_ptr.size()) +
                    " != n_rows + 1");
    }
    if (row_ptr.front() != 0) throw Error("csr: row_ptr[0] != 0");
    if (row_ptr.back() != col_idx.size() || col_idx.size() != values.size()) {
        throw Error("csr: row_ptr[n_rows], col_idx and values disagree on nnz");
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (row_ptr[i] > row_ptr[i + 1]) {
            throw Error("csr: row_ptr decreases at row " + std::to_string(i));
        }
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            if (col_idx[k] >= n_cols) {
                throw Error("csr: column index out of range in row " +
                            std::to_string(i));
            }
            if (k > row_ptr[i] && col_idx[k] <= col_idx[k - 1]) {
                throw Error("csr: columns not strictly increasing in row " +
                            std::to_string(i));
            }
        }
    }
}

std::size_t CsrMatrix::find(std::size_t i, std::size_t j) const
{
    auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it != last && *it == j) {
        return static_cast<std::size_t>(it - col_idx.begin());
    }
    return nnz();
}

double CsrMatrix::at(std::size_t i, std::size_t j) const
{
    auto k = find(i, j);
    return k == nnz() ? 0.0 : values[k];
}

CsrMatrix CsrMatrix::identity(std::size_t n)
{
    CsrMatrix a;
    a.n_rows = a.n_cols = n;
    a.row_ptr.resize(n + 1);
    a.col_idx.resize(n);
    a.values.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        a.row_ptr[i + 1] = i + 1;
        a.col_idx[i] = i;
    }
    return a;
}

CsrMatrix CsrMatrix::from_dense(std::size_t n_rows, std::size_t n_cols,
                                std::span<const double> dense)
{
    if (dense.size() != n_rows * n_cols) throw Error("from_dense: size mismatch");
    CsrMatrix a;
    a.n_rows = n_rows;
    a.n_cols = n_cols;
    a.row_ptr.assign(n_rows + 1, 0);
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t j = 0; j < n_cols; ++j) {
            double v = dense[i * n_cols + j];
            if (v != 0.0) {
                a.col_idx.push_back(j);
                a.values.push_back(v);
            }
        }
        a.row_ptr[i + 1] = a.col_idx.size();
    }
    return a;
}

CsrMatrix CsrMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> entries)
{
    std::sort(entries.begin(), entries.end(), [](const Triplet& l, const Triplet& r) {
        return l.row != r.row ? l.row < r.row : l.col < r.col;
    });
    CsrMatrix a;
    a.n_rows = n_rows;
    a.n_cols = n_cols;
    a.row_ptr.assign(n_rows + 1, 0);
    a.col_idx.reserve(entries.size());
    a.values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& t = entries[k];
        if (t.row >= n_rows || t.col >= n_cols) {
            throw Error("from_triplets: entry (" + std::to_string(t.row) + ", " +
                        std::to_string(t.col) + ") out of range");
        }
        if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
            throw Error("from_triplets: duplicate entry (" + std::to_string(t.row) +
                        ", " + std::to_string(t.col) + ")");
        }
        a.col_idx.push_back(t.col);
        a.values.push_back(t.value);
        ++a.row_ptr[t.row + 1];
    }
    for (std::size_t i = 0; i < n_rows; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
    return a;
}

std::vector<double> to_dense(const CsrMatrix& a)
{
    std::vector<double> d(a.n_rows * a.n_cols, 0.0);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            d[i * a.n_cols + a.col_idx[k]] = a.values[k];
        }
    }
    return d;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y)
{
    if (x.size() != a.n_cols || y.size() != a.n_rows) {
        throw Error("spmv: dimension mismatch (A is " + std::to_string(a.n_rows) + "x" +
                    std::to_string(a.n_cols) + ", x has " + std::to_string(x.size()) +
                    ")");
    }
    const auto* rp = a.row_ptr.data();
    const auto* ci = a.col_idx.data();
    const auto* v = a.values.data();
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        double sum = 0.0;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) sum += v[k] * x[ci[k]];
        y[i] = sum;
    }
}

Vector spmv(const CsrMatrix& a, std::span<const double> x)
{
    Vector y(a.n_rows);
    spmv(a, x, y);
    return y;
}

Vector spmv_transpose(const CsrMatrix& a, std::span<const double> x)
{
    if (x.size() != a.n_rows) {
        throw Error("spmv_transpose: dimension mismatch (A has " +
                    std::to_string(a.n_rows) + " rows, x has " +
                    std::to_string(x.size()) + ")");
    }
    Vector y(a.n_cols, 0.0);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            y[a.col_idx[k]] += a.values[k] * x[i];
        }
    }
    return y;
}

CsrMatrix transpose(const CsrMatrix& a)
{
    CsrMatrix t;
    t.n_rows = a.n_cols;
    t.n_cols = a.n_rows;
    t.row_ptr.assign(a.n_cols + 1, 0);
    for (auto j : a.col_idx) ++t.row_ptr[j + 1];
    for (std::size_t j = 0; j < a.n_cols; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
    t.col_idx.resize(a.nnz());
    t.values.resize(a.nnz());
    std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
    // Rows visited in increasing order keep the transposed rows sorted.
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            auto dst = next[a.col_idx[k]]++;
            t.col_idx[dst] = i;
            t.values[dst] = a.values[k];
        }
    }
    return t;
}

bool structurally_symmetric(const CsrMatrix& a)
{
    if (!a.square()) return false;
    auto t = transpose(a);
    return t.row_ptr == a.row_ptr && t.col_idx == a.col_idx;
}

bool has_full_diagonal(const CsrMatrix& a)
{
    if (!a.square()) return false;
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        if (a.find(i, i) == a.nnz()) return false;
    }
    return true;
}

Vector diagonal(const CsrMatrix& a)
{
    Vector d(std::min(a.n_rows, a.n_cols), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.at(i, i);
    return d;
}

CsrMatrix scaled(const CsrMatrix& a, double c)
{
    CsrMatrix s = a;
    for (auto& v : s.values) v *= c;
    return s;
}

double dot(std::span<const double> x, std::span<const double> y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

std::optional<double> row_log10_ratio(const CsrMatrix& a, std::size_t i)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    std::size_t count = 0;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        if (a.col_idx[k] == i || a.values[k] == 0.0) continue;
        double m = std::abs(a.values[k]);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
        ++count;
    }
    if (count < 2) return std::nullopt;
    return std::log10(hi / lo);
}

MultiscaleReport multiscale_report(const CsrMatrix& a, double delta)
{
    if (!a.square()) throw Error("multiscale_report: matrix must be square");
    if (!(delta >= 0.0)) throw Error("multiscale_report: delta must be >= 0");
    MultiscaleReport report;
    report.delta = delta;
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        auto r = row_log10_ratio(a, i);
        if (!r) continue;
        report.max_row_ratio_log10 = std::max(report.max_row_ratio_log10, *r);
        if (*r >= delta) report.rows.push_back(i);
    }
    return report;
}

bool is_multiscale(const CsrMatrix& a, double delta)
{
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        auto r = row_log10_ratio(a, i);
        if (r && *r >= delta) return true;
    }
    return false;
}

CsrMatrix drop_min_entry(const CsrMatrix& a)
{
    if (!a.square()) throw Error("drop_min_entry: matrix must be square");
    std::size_t best = a.nnz();
    std::size_t best_row = 0;
    double best_mag = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col_idx[k] == i) continue;
            double m = std::abs(a.values[k]);
            if (m < best_mag) {
                best_mag = m;
                best = k;
                best_row = i;
            }
        }
    }
    if (best == a.nnz()) throw Error("drop_min_entry: no off-diagonal entries");

    std::size_t mirror = a.nnz();
    if (structurally_symmetric(a)) mirror = a.find(a.col_idx[best], best_row);

    CsrMatrix out;
    out.n_rows = a.n_rows;
    out.n_cols = a.n_cols;
    out.row_ptr.assign(a.n_rows + 1, 0);
    out.col_idx.reserve(a.nnz());
    out.values.reserve(a.nnz());
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (k == best || k == mirror) continue;
            out.col_idx.push_back(a.col_idx[k]);
            out.values.push_back(a.values[k]);
        }
        out.row_ptr[i + 1] = out.col_idx.size();
    }
    return out;
}

}  // namespace autoamg
