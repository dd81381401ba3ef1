#include "autoamg/amg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "autoamg/rng.hpp"

namespace autoamg {

bool Pattern::contains(std::size_t i, std::size_t j) const
{
    auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
}

Pattern transpose(const Pattern& p)
{
    Pattern t;
    t.n_rows = p.n_cols;
    t.n_cols = p.n_rows;
    t.row_ptr.assign(p.n_cols + 1, 0);
    for (auto j : p.col_idx) ++t.row_ptr[j + 1];
    for (std::size_t j = 0; j < p.n_cols; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
    t.col_idx.resize(p.col_idx.size());
    std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
            t.col_idx[next[p.col_idx[k]]++] = i;
        }
    }
    return t;
}

StrengthGraph strength_graph(const CsrMatrix& a, double theta)
{
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw Error("strength_graph: theta must lie in (0, 1], got " +
                    std::to_string(theta));
    }
    if (!a.square()) throw Error("strength_graph: matrix must be square");
    StrengthGraph s;
    s.n = a.n_rows;
    s.strong.n_rows = s.strong.n_cols = a.n_rows;
    s.strong.row_ptr.assign(a.n_rows + 1, 0);
    s.strong.col_idx.reserve(a.nnz());
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        double max_off = 0.0;
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col_idx[k] != i) max_off = std::max(max_off, std::abs(a.values[k]));
        }
        if (max_off > 0.0) {
            const double cut = theta * max_off;
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
                const double v = std::abs(a.values[k]);
                if (a.col_idx[k] != i && v != 0.0 && v >= cut) {
                    s.strong.col_idx.push_back(a.col_idx[k]);
                }
            }
        }
        s.strong.row_ptr[i + 1] = s.strong.col_idx.size();
    }
    s.strong_transpose = transpose(s.strong);
    return s;
}

std::size_t CfSplitting::num_coarse() const
{
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Point::C));
}

std::vector<std::size_t> CfSplitting::coarse_index() const
{
    std::vector<std::size_t> idx(labels.size(), std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Point::C) idx[i] = next++;
    }
    return idx;
}

CfSplitting pmis_coarsen(const StrengthGraph& s, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> w(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        w[i] = static_cast<double>(s.strong_transpose.row_size(i)) + rng.uniform();
    }
    return pmis_coarsen(s, w);
}

CfSplitting pmis_coarsen(const StrengthGraph& s, std::span<const double> measures)
{
    if (measures.size() != s.n) throw Error("pmis_coarsen: measure count mismatch");
    enum : std::uint8_t { Undecided, Coarse, Fine };
    std::vector<std::uint8_t> state(s.n, Undecided);

    std::vector<std::size_t> undecided;
    for (std::size_t i = 0; i < s.n; ++i) {
        if (s.strong.row_size(i) == 0 && s.strong_transpose.row_size(i) == 0) {
            state[i] = Fine;
        } else {
            undecided.push_back(i);
        }
    }

    auto beats = [&](std::size_t i, std::size_t j) {
        return measures[i] > measures[j] || (measures[i] == measures[j] && i > j);
    };
    auto for_each_neighbour = [&](std::size_t i, auto&& fn) {
        for (auto j : s.strong.row(i)) fn(j);
        for (auto j : s.strong_transpose.row(i)) fn(j);
    };

    std::vector<std::size_t> selected;
    while (!undecided.empty()) {
        selected.clear();
        for (auto i : undecided) {
            bool local_max = true;
            for_each_neighbour(i, [&](std::size_t j) {
                if (state[j] == Undecided && !beats(i, j)) local_max = false;
            });
            if (local_max) selected.push_back(i);
        }
        for (auto i : selected) state[i] = Coarse;
        for (auto i : selected) {
            for_each_neighbour(i, [&](std::size_t j) {
                if (state[j] == Undecided) state[j] = Fine;
            });
        }
        std::erase_if(undecided, [&](std::size_t i) { return state[i] != Undecided; });
    }

    CfSplitting split;
    split.labels.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        split.labels[i] = state[i] == Coarse ? Point::C : Point::F;
    }
    return split;
}

CsrMatrix direct_interpolation(const CsrMatrix& a, const StrengthGraph& s,
                               const CfSplitting& split)
{
    const std::size_t n = a.n_rows;
    if (split.labels.size() != n || s.n != n) {
        throw Error("direct_interpolation: size mismatch");
    }
    const auto cidx = split.coarse_index();
    CsrMatrix p;
    p.n_rows = n;
    p.n_cols = split.num_coarse();
    p.row_ptr.assign(n + 1, 0);

    std::vector<std::size_t> strong_c;
    for (std::size_t i = 0; i < n; ++i) {
        if (split.labels[i] == Point::C) {
            p.col_idx.push_back(cidx[i]);
            p.values.push_back(1.0);
            p.row_ptr[i + 1] = p.col_idx.size();
            continue;
        }
        strong_c.clear();
        for (auto j : s.strong.row(i)) {
            if (split.labels[j] == Point::C) strong_c.push_back(j);
        }
        if (!strong_c.empty()) {
            double a_ii = 0.0;
            double sum_all = 0.0;
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
                if (a.col_idx[k] == i) {
                    a_ii = a.values[k];
                } else {
                    sum_all += a.values[k];
                }
            }
            if (a_ii == 0.0) {
                throw Error("direct_interpolation: zero diagonal in row " +
                            std::to_string(i));
            }
            double sum_c = 0.0;
            for (auto j : strong_c) sum_c += a.at(i, j);
            // strong_c is sorted (taken from a sorted row), so coarse columns are too.
            for (auto j : strong_c) {
                double w = sum_c == 0.0
                               ? 1.0 / static_cast<double>(strong_c.size())
                               : -(a.at(i, j) / a_ii) * (sum_all / sum_c);
                p.col_idx.push_back(cidx[j]);
                p.values.push_back(w);
            }
        }
        p.row_ptr[i + 1] = p.col_idx.size();
    }
    return p;
}

namespace {

/// C = A B with a dense accumulator; columns sorted per row.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b)
{
    if (a.n_cols != b.n_rows) throw Error("sparse product: dimension mismatch");
    CsrMatrix c;
    c.n_rows = a.n_rows;
    c.n_cols = b.n_cols;
    c.row_ptr.assign(a.n_rows + 1, 0);
    std::vector<double> acc(b.n_cols, 0.0);
    std::vector<std::size_t> marker(b.n_cols, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        cols.clear();
        for (std::size_t ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
            const std::size_t k = a.col_idx[ka];
            const double av = a.values[ka];
            for (std::size_t kb = b.row_ptr[k]; kb < b.row_ptr[k + 1]; ++kb) {
                const std::size_t j = b.col_idx[kb];
                if (marker[j] != i) {
                    marker[j] = i;
                    acc[j] = 0.0;
                    cols.push_back(j);
                }
                acc[j] += av * b.values[kb];
            }
        }
        std::sort(cols.begin(), cols.end());
        for (auto j : cols) {
            c.col_idx.push_back(j);
            c.values.push_back(acc[j]);
        }
        c.row_ptr[i + 1] = c.col_idx.size();
    }
    return c;
}

}  // namespace

CsrMatrix galerkin(const CsrMatrix& a, const CsrMatrix& p)
{
    if (!a.square() || p.n_rows != a.n_rows) {
        throw Error("galerkin: dimension mismatch (A " + std::to_string(a.n_rows) + "x" +
                    std::to_string(a.n_cols) + ", P " + std::to_string(p.n_rows) + "x" +
                    std::to_string(p.n_cols) + ")");
    }
    return multiply(transpose(p), multiply(a, p));
}

double Hierarchy::operator_complexity() const
{
    if (levels.empty() || levels.front().a.nnz() == 0) return 0.0;
    double total = 0.0;
    for (const auto& l : levels) total += static_cast<double>(l.a.nnz());
    return total / static_cast<double>(levels.front().a.nnz());
}

nlohmann::json Hierarchy::stats() const
{
    nlohmann::json j;
    j["theta"] = params.theta;
    j["levels"] = levels.size();
    j["sizes"] = nlohmann::json::array();
    j["nnz"] = nlohmann::json::array();
    for (const auto& l : levels) {
        j["sizes"].push_back(l.a.n_rows);
        j["nnz"].push_back(l.a.nnz());
    }
    j["operator_complexity"] = operator_complexity();
    return j;
}

Hierarchy assemble_hierarchy(std::vector<Level> levels, const AmgParams& params)
{
    if (levels.empty()) throw Error("assemble_hierarchy: no levels");
    Hierarchy h;
    h.params = params;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        auto& l = levels[k];
        if (!l.a.square()) throw Error("level " + std::to_string(k) + ": A not square");
        l.inv_diag.assign(l.a.n_rows, 0.0);
        for (std::size_t i = 0; i < l.a.n_rows; ++i) {
            const double d = l.a.at(i, i);
            if (d == 0.0 || !std::isfinite(d)) {
                throw Error("level " + std::to_string(k) + ": zero diagonal in row " +
                            std::to_string(i));
            }
            l.inv_diag[i] = 1.0 / d;
        }
        if (k + 1 < levels.size()) {
            if (l.p.n_rows != l.a.n_rows || l.p.n_cols != levels[k + 1].a.n_rows) {
                throw Error("level " + std::to_string(k) + ": P does not conform");
            }
            l.r = transpose(l.p);
        }
    }
    const auto& last = levels.back();
    if (last.a.n_rows > params.max_dense_size) {
        throw Error("coarsest level " + std::to_string(levels.size() - 1) + " has " +
                    std::to_string(last.a.n_rows) + " rows, above the dense limit");
    }
    try {
        h.coarsest = DenseLu(last.a);
    } catch (const Error&) {
        throw Error("singular coarsest matrix on level " +
                    std::to_string(levels.size() - 1));
    }
    h.levels = std::move(levels);
    return h;
}

Hierarchy setup(const CsrMatrix& a, const AmgParams& params)
{
    if (!a.square()) throw Error("setup: matrix must be square");
    if (!has_full_diagonal(a)) throw Error("setup: matrix needs a stored diagonal");
    std::vector<Level> levels;
    levels.push_back(Level{a, {}, {}, {}, {}});
    while (levels.size() < params.max_levels) {
        const CsrMatrix& cur = levels.back().a;
        if (cur.n_rows <= params.coarse_size_limit) break;
        auto s = strength_graph(cur, params.theta);
        auto split = pmis_coarsen(s, params.seed + levels.size() - 1);
        const auto nc = split.num_coarse();
        if (nc == 0 || nc == cur.n_rows) break;
        auto p = direct_interpolation(cur, s, split);
        auto ac = galerkin(cur, p);
        levels.back().p = std::move(p);
        levels.back().splitting = std::move(split);
        levels.push_back(Level{std::move(ac), {}, {}, {}, {}});
    }
    return assemble_hierarchy(std::move(levels), params);
}

namespace {

void gauss_seidel_forward(const Level& l, std::span<const double> b, std::span<double> x)
{
    const auto& a = l.a;
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        double s = b[i];
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            const auto j = a.col_idx[k];
            if (j != i) s -= a.values[k] * x[j];
        }
        x[i] = s * l.inv_diag[i];
    }
}

void gauss_seidel_backward(const Level& l, std::span<const double> b, std::span<double> x)
{
    const auto& a = l.a;
    for (std::size_t i = a.n_rows; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            const auto j = a.col_idx[k];
            if (j != i) s -= a.values[k] * x[j];
        }
        x[i] = s * l.inv_diag[i];
    }
}

void cycle(const Hierarchy& h, std::size_t k, std::span<const double> b, std::span<double> x)
{
    if (k + 1 == h.levels.size()) {
        std::copy(b.begin(), b.end(), x.begin());
        h.coarsest.solve(x);
        return;
    }
    const Level& l = h.levels[k];
    for (int s = 0; s < h.params.pre_sweeps; ++s) gauss_seidel_forward(l, b, x);

    Vector r(l.a.n_rows);
    spmv(l.a, x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    Vector bc(l.r.n_rows);
    spmv(l.r, r, bc);
    Vector xc(bc.size(), 0.0);
    cycle(h, k + 1, bc, xc);
    // x += P xc
    const auto& p = l.p;
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        double s = 0.0;
        for (std::size_t q = p.row_ptr[i]; q < p.row_ptr[i + 1]; ++q) {
            s += p.values[q] * xc[p.col_idx[q]];
        }
        x[i] += s;
    }

    for (int s = 0; s < h.params.post_sweeps; ++s) gauss_seidel_backward(l, b, x);
}

}  // namespace

void vcycle_inplace(const Hierarchy& h, std::span<const double> b, std::span<double> x)
{
    const auto n = h.levels.front().a.n_rows;
    if (b.size() != n || x.size() != n) throw Error("vcycle: dimension mismatch");
    cycle(h, 0, b, x);
}

Vector vcycle(const Hierarchy& h, std::span<const double> b, std::span<const double> x)
{
    Vector out(x.begin(), x.end());
    vcycle_inplace(h, b, out);
    return out;
}

FactorEstimate tg_convergence_factor_theoretical(const Hierarchy& h, std::uint64_t seed)
{
    constexpr std::size_t max_iter = 1000;
    constexpr double tol = 1e-6;
    const auto n = h.levels.front().a.n_rows;
    const Vector zero(n, 0.0);

    Rng rng(seed);
    Vector v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    double nv = norm2(v);
    for (auto& x : v) x /= nv;

    FactorEstimate est;
    double prev = -1.0;
    std::vector<double> history;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        vcycle_inplace(h, zero, v);
        const double growth = norm2(v);
        est.iterations = it;
        if (growth == 0.0) {
            est.value = 0.0;
            return est;
        }
        for (auto& x : v) x /= growth;
        history.push_back(growth);
        est.value = growth;
        if (it >= 10 && std::abs(growth - prev) < tol) return est;
        prev = growth;
    }
    // No settled estimate: report the geometric mean of the trailing half.
    const std::size_t tail = history.size() / 2;
    double log_sum = 0.0;
    for (std::size_t k = history.size() - tail; k < history.size(); ++k) {
        log_sum += std::log(history[k]);
    }
    est.value = std::exp(log_sum / static_cast<double>(tail));
    est.converged = false;
    return est;
}

double tg_convergence_factor_computed(const Hierarchy& h, std::size_t iters,
                                      std::uint64_t seed)
{
    if (iters < 10) throw Error("tg_convergence_factor_computed: need iters >= 10");
    // Homogeneous system: the exact solution is 0, so the iterate is the error
    // and no round-off floor from a nonzero solution pollutes the ratios.
    const auto n = h.levels.front().a.n_rows;
    Rng rng(seed);
    Vector x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const Vector b(n, 0.0);

    double prev = norm2(x);
    std::vector<double> ratios;
    ratios.reserve(iters);
    for (std::size_t it = 0; it < iters; ++it) {
        vcycle_inplace(h, b, x);
        const double e = norm2(x);
        if (e == 0.0) return 0.0;
        ratios.push_back(e / prev);
        prev = e;
        if (e < 1e-250) break;
    }
    const std::size_t tail = (ratios.size() + 1) / 2;
    double log_sum = 0.0;
    for (std::size_t k = ratios.size() - tail; k < ratios.size(); ++k) {
        log_sum += std::log(ratios[k]);
    }
    return std::exp(log_sum / static_cast<double>(tail));
}

StationaryResult stationary_solve(const Hierarchy& h, std::span<const double> b,
                                  double tol, std::size_t max_iter)
{
    const auto& a = h.levels.front().a;
    const double nb = norm2(b);
    StationaryResult res;
    if (nb == 0.0) {
        res.converged = true;
        return res;
    }
    Vector x(a.n_rows, 0.0), r(a.n_rows);
    while (res.iterations < max_iter) {
        vcycle_inplace(h, b, x);
        ++res.iterations;
        spmv(a, x, r);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
        if (norm2(r) / nb < tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

}  // namespace autoamg
