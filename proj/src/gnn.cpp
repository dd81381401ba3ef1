#include "autoamg/gnn.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <string>

namespace autoamg {

namespace {

constexpr double kLogCap = 16.0;

// Rounds to 21 significant bits (half away from zero). Ratios of entries of
// cA differ from those of A by a few ulps at most; rounding this coarsely
// absorbs that.
double quantize(double v)
{
    constexpr int drop = 52 - 20;
    auto bits = std::bit_cast<std::uint64_t>(v);
    bits += std::uint64_t{1} << (drop - 1);
    bits &= ~((std::uint64_t{1} << drop) - 1);
    return std::bit_cast<double>(bits);
}

void require_finite(const NodeFeatureMatrix& x, std::size_t layer)
{
    if (!x.all_finite()) {
        throw Error("gcin: non-finite value in layer " + std::to_string(layer));
    }
}

void affine_forward(const Affine& l, const NodeFeatureMatrix& x, NodeFeatureMatrix& y)
{
    y = NodeFeatureMatrix(x.n, l.out);
    for (std::size_t i = 0; i < x.n; ++i) {
        double* yr = y.row(i).data();
        std::copy(l.bias.begin(), l.bias.end(), yr);
        const double* xr = x.row(i).data();
        for (std::size_t p = 0; p < l.in; ++p) {
            const double xv = xr[p];
            const double* wr = l.weight.data() + p * l.out;
            for (std::size_t q = 0; q < l.out; ++q) yr[q] += xv * wr[q];
        }
    }
}

Affine glorot(std::size_t in, std::size_t out, Rng& rng)
{
    Affine l;
    l.in = in;
    l.out = out;
    l.weight.resize(in * out);
    l.bias.assign(out, 0.0);
    const double r = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.weight) w = rng.uniform(-r, r);
    return l;
}

}  // namespace

bool NodeFeatureMatrix::all_finite() const
{
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

NodeFeatureMatrix init_node_features(const CsrMatrix& a)
{
    if (!a.square()) throw Error("init_node_features: matrix must be square");
    const std::size_t n = a.n_rows;
    NodeFeatureMatrix x(n, kNodeFeatureWidth);
    if (n == 0) return x;

    Vector diag(n, 0.0);
    std::vector<std::size_t> degree(n, 0);
    double max_diag = 0.0;
    std::size_t max_degree = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col_idx[k] == i) {
                diag[i] = a.values[k];
            } else if (a.values[k] != 0.0) {
                ++degree[i];
            }
        }
        if (diag[i] == 0.0) {
            throw Error("init_node_features: zero diagonal in row " + std::to_string(i));
        }
        max_diag = std::max(max_diag, std::abs(diag[i]));
        max_degree = std::max(max_degree, degree[i]);
    }

    for (std::size_t i = 0; i < n; ++i) {
        double lo = INFINITY, hi = 0.0, sum = 0.0;
        std::size_t negative = 0;
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            const double v = a.values[k];
            if (a.col_idx[k] == i || v == 0.0) continue;
            const double m = std::abs(v);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
            sum += m;
            if (v < 0.0) ++negative;
        }
        const double ad = std::abs(diag[i]);
        auto row = x.row(i);
        row[0] = diag[i] > 0.0 ? 1.0 : -1.0;
        row[1] = std::clamp(1.0 + std::log10(ad / max_diag) / kLogCap, 0.0, 1.0);
        row[2] = max_degree == 0 ? 0.0
                                 : static_cast<double>(degree[i]) / static_cast<double>(max_degree);
        row[3] = degree[i] <= 1 ? 0.0 : std::clamp(std::log10(hi / lo) / kLogCap, 0.0, 1.0);
        row[4] = degree[i] == 0 ? 0.0
                                : static_cast<double>(negative) / static_cast<double>(degree[i]);
        row[5] = std::min(sum / ad, 4.0) / 4.0;
        for (double& v : row) v = quantize(v);
    }
    return x;
}

EdgeWeighting edge_weights(const CsrMatrix& a)
{
    if (!a.square()) throw Error("edge_weights: matrix must be square");
    const std::size_t n = a.n_rows;
    CsrMatrix w;
    if (has_full_diagonal(a)) {
        w = a;
    } else {
        std::vector<Triplet> t;
        t.reserve(a.nnz() + n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
                t.push_back({i, a.col_idx[k], a.values[k]});
            }
            if (a.find(i, i) == a.nnz()) t.push_back({i, i, 0.0});
        }
        w = CsrMatrix::from_triplets(n, n, std::move(t));
    }
    for (std::size_t i = 0; i < n; ++i) {
        double mx = 0.0;
        for (std::size_t k = w.row_ptr[i]; k < w.row_ptr[i + 1]; ++k) {
            mx = std::max(mx, std::abs(w.values[k]));
        }
        if (mx == 0.0) throw Error("edge_weights: zero row " + std::to_string(i));
        for (std::size_t k = w.row_ptr[i]; k < w.row_ptr[i + 1]; ++k) {
            w.values[k] = quantize(w.values[k] / mx);
        }
    }
    return EdgeWeighting{std::move(w)};
}

Mlp Mlp::random(std::span<const std::size_t> dims, Activation hidden, Rng& rng)
{
    if (dims.size() < 2) throw Error("Mlp: need at least an input and an output width");
    Mlp m;
    m.hidden = hidden;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l] == 0 || dims[l + 1] == 0) throw Error("Mlp: zero width");
        m.layers.push_back(glorot(dims[l], dims[l + 1], rng));
    }
    return m;
}

Mlp Mlp::zeros_like(const Mlp& m)
{
    Mlp z = m;
    for_each_block(z, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
    return z;
}

NodeFeatureMatrix mlp_forward(const Mlp& m, const NodeFeatureMatrix& x, MlpCache* cache)
{
    if (x.d != m.in_width()) throw Error("mlp_forward: input width mismatch");
    if (cache) {
        cache->inputs.clear();
        cache->inputs.push_back(x);
    }
    NodeFeatureMatrix cur = x, next;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        affine_forward(m.layers[l], cur, next);
        if (l + 1 < m.layers.size() && m.hidden == Activation::Tanh) {
            for (double& v : next.data) v = std::tanh(v);
        }
        std::swap(cur, next);
        if (cache && l + 1 < m.layers.size()) cache->inputs.push_back(cur);
    }
    return cur;
}

NodeFeatureMatrix mlp_backward(const Mlp& m, const MlpCache& cache,
                               const NodeFeatureMatrix& d_out, Mlp& grad,
                               bool want_input_grad)
{
    NodeFeatureMatrix dy = d_out;
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const Affine& layer = m.layers[l];
        Affine& g = grad.layers[l];
        const NodeFeatureMatrix& x = cache.inputs[l];
        for (std::size_t i = 0; i < x.n; ++i) {
            const double* dr = dy.row(i).data();
            const double* xr = x.row(i).data();
            for (std::size_t q = 0; q < layer.out; ++q) g.bias[q] += dr[q];
            for (std::size_t p = 0; p < layer.in; ++p) {
                const double xv = xr[p];
                double* gw = g.weight.data() + p * layer.out;
                for (std::size_t q = 0; q < layer.out; ++q) gw[q] += xv * dr[q];
            }
        }
        if (l == 0 && !want_input_grad) return {};

        NodeFeatureMatrix dx(x.n, layer.in);
        for (std::size_t i = 0; i < x.n; ++i) {
            const double* dr = dy.row(i).data();
            double* out = dx.row(i).data();
            for (std::size_t p = 0; p < layer.in; ++p) {
                const double* wr = layer.weight.data() + p * layer.out;
                double s = 0.0;
                for (std::size_t q = 0; q < layer.out; ++q) s += wr[q] * dr[q];
                out[p] = s;
            }
        }
        if (l > 0 && m.hidden == Activation::Tanh) {
            // x is tanh of the previous pre-activation
            for (std::size_t k = 0; k < dx.data.size(); ++k) {
                dx.data[k] *= 1.0 - x.data[k] * x.data[k];
            }
        }
        dy = std::move(dx);
    }
    return dy;
}

GcinParams GcinParams::random(std::size_t num_layers, std::size_t in_width,
                              std::size_t hidden_width, std::size_t out_width, Rng& rng)
{
    if (num_layers == 0) throw Error("GcinParams: need at least one layer");
    GcinParams p;
    for (std::size_t k = 0; k < num_layers; ++k) {
        const std::size_t dims[] = {k == 0 ? in_width : out_width, hidden_width, out_width};
        p.layers.push_back(Mlp::random(dims, Activation::Tanh, rng));
    }
    return p;
}

GcinParams GcinParams::zeros_like(const GcinParams& p)
{
    GcinParams z;
    for (const auto& m : p.layers) z.layers.push_back(Mlp::zeros_like(m));
    return z;
}

void GcinParams::validate() const
{
    if (layers.empty()) throw Error("GcinParams: no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Mlp& m = layers[k];
        if (m.layers.empty()) throw Error("GcinParams: empty MLP in layer " + std::to_string(k));
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            const Affine& a = m.layers[l];
            if (a.weight.size() != a.in * a.out || a.bias.size() != a.out) {
                throw Error("GcinParams: bad parameter shape in layer " + std::to_string(k));
            }
            if (l > 0 && m.layers[l - 1].out != a.in) {
                throw Error("GcinParams: widths do not chain in layer " + std::to_string(k));
            }
        }
        if (k > 0 && layers[k - 1].out_width() != m.in_width()) {
            throw Error("GcinParams: layer " + std::to_string(k) + " input width mismatch");
        }
        if (m.out_width() != layers.front().out_width()) {
            throw Error("GcinParams: layers must share one output width");
        }
    }
}

std::vector<double> gcin_forward(const EdgeWeighting& w, const NodeFeatureMatrix& x0,
                                 const GcinParams& params, GcinCache* cache)
{
    const CsrMatrix& W = w.w;
    if (W.n_rows != x0.n || W.n_cols != x0.n) throw Error("gcin_forward: size mismatch");
    if (params.layers.empty() || params.layers.front().in_width() != x0.d) {
        throw Error("gcin_forward: input width mismatch");
    }
    const std::size_t n = x0.n;
    if (cache) {
        cache->layers.assign(params.num_layers(), {});
        cache->n = n;
    }
    std::vector<double> readout(params.out_width(), 0.0);
    NodeFeatureMatrix x = x0;
    for (std::size_t k = 0; k < params.num_layers(); ++k) {
        NodeFeatureMatrix agg(n, x.d);
        for (std::size_t i = 0; i < n; ++i) {
            double* out = agg.row(i).data();
            for (std::size_t e = W.row_ptr[i]; e < W.row_ptr[i + 1]; ++e) {
                const double wij = W.values[e];
                if (wij == 0.0) continue;
                const double* xr = x.row(W.col_idx[e]).data();
                for (std::size_t c = 0; c < x.d; ++c) out[c] += wij * xr[c];
            }
        }
        x = mlp_forward(params.layers[k], agg, cache ? &cache->layers[k] : nullptr);
        require_finite(x, k + 1);
        if (x.d != readout.size()) throw Error("gcin_forward: layers must share one output width");
        std::vector<double> mean(x.d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xr = x.row(i).data();
            for (std::size_t c = 0; c < x.d; ++c) mean[c] += xr[c];
        }
        for (std::size_t c = 0; c < x.d; ++c) readout[c] += n == 0 ? 0.0 : mean[c] / n;
    }
    return readout;
}

void gcin_backward(const EdgeWeighting& w, const GcinParams& params,
                   const GcinCache& cache, std::span<const double> d_readout,
                   GcinParams& grad)
{
    const CsrMatrix& W = w.w;
    const std::size_t n = cache.n;
    const std::size_t width = params.out_width();
    if (d_readout.size() != width) throw Error("gcin_backward: gradient width mismatch");
    if (cache.layers.size() != params.num_layers()) throw Error("gcin_backward: stale cache");
    if (n == 0) return;

    NodeFeatureMatrix from_next;  // W^T dM^(k+1), the part of dX^(k) coming from layer k+1
    for (std::size_t k = params.num_layers(); k-- > 0;) {
        NodeFeatureMatrix dx(n, width);
        for (std::size_t i = 0; i < n; ++i) {
            double* r = dx.row(i).data();
            for (std::size_t c = 0; c < width; ++c) r[c] = d_readout[c] / n;
        }
        if (!from_next.data.empty()) {
            for (std::size_t q = 0; q < dx.data.size(); ++q) dx.data[q] += from_next.data[q];
        }
        NodeFeatureMatrix dm =
            mlp_backward(params.layers[k], cache.layers[k], dx, grad.layers[k], k > 0);
        if (k == 0) break;

        from_next = NodeFeatureMatrix(n, dm.d);
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = dm.row(i).data();
            for (std::size_t e = W.row_ptr[i]; e < W.row_ptr[i + 1]; ++e) {
                const double wij = W.values[e];
                if (wij == 0.0) continue;
                double* dst = from_next.row(W.col_idx[e]).data();
                for (std::size_t c = 0; c < dm.d; ++c) dst[c] += wij * src[c];
            }
        }
    }
}

}  // namespace autoamg
