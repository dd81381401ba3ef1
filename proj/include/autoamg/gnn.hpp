#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "autoamg/rng.hpp"
#include "autoamg/sparse.hpp"

namespace autoamg {

/// Identifies the node-feature and edge-weight recipe below. Models trained
/// against one recipe refuse to run against another.
inline constexpr std::string_view kFeatureFingerprint = "gcin-node6-rowmax-q21-v1";
inline constexpr std::size_t kNodeFeatureWidth = 6;

/// Dense n x d block of per-node values, row-major.
struct NodeFeatureMatrix {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> data;

    NodeFeatureMatrix() = default;
    NodeFeatureMatrix(std::size_t rows, std::size_t cols)
        : n(rows), d(cols), data(rows * cols, 0.0)
    {
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * d + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * d + j]; }
    std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
    bool all_finite() const;
};

/// Per-node statistics of A, all invariant under A -> cA for c > 0:
///   0  sign(a_ii)
///   1  1 + log10(|a_ii| / max_j |a_jj|) / 16, clamped to [0, 1]
///   2  off-diagonal degree / max degree
///   3  log10(max/min off-diagonal magnitude) / 16, clamped to [0, 1]
///   4  fraction of negative off-diagonals
///   5  min(sum |a_ik| / |a_ii|, 4) / 4
/// Values are rounded to 21 significant bits, so that the round-off of
/// forming cA cannot leak into the features.
NodeFeatureMatrix init_node_features(const CsrMatrix& a);

/// Message-passing weights: w_ij = a_ij / max_k |a_ik| (row maximum over the
/// whole row, diagonal included), rounded like the node features. The
/// diagonal is always present.
struct EdgeWeighting {
    CsrMatrix w;
};

EdgeWeighting edge_weights(const CsrMatrix& a);

enum class Activation { Identity, Tanh };

/// y = x W + b for every row x; weight is in x out, row-major.
struct Affine {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
};

/// Affine layers with `hidden` applied between consecutive layers (never
/// after the last one).
struct Mlp {
    std::vector<Affine> layers;
    Activation hidden = Activation::Tanh;

    std::size_t in_width() const { return layers.front().in; }
    std::size_t out_width() const { return layers.back().out; }

    /// Uniform Glorot initialisation, zero biases.
    static Mlp random(std::span<const std::size_t> dims, Activation hidden, Rng& rng);
    /// Same shape with every parameter 0.
    static Mlp zeros_like(const Mlp& m);
};

/// Inputs of every affine layer, as needed by the backward pass.
struct MlpCache {
    std::vector<NodeFeatureMatrix> inputs;
};

NodeFeatureMatrix mlp_forward(const Mlp& m, const NodeFeatureMatrix& x, MlpCache* cache);

/// Accumulates parameter gradients into `grad` and returns d(loss)/d(input)
/// when `want_input_grad` is set (an empty matrix otherwise).
NodeFeatureMatrix mlp_backward(const Mlp& m, const MlpCache& cache,
                               const NodeFeatureMatrix& d_out, Mlp& grad,
                               bool want_input_grad);

struct GcinParams {
    std::vector<Mlp> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t out_width() const { return layers.back().out_width(); }

    /// `num_layers` layers of in -> hidden -> out MLPs with tanh in between.
    static GcinParams random(std::size_t num_layers, std::size_t in_width,
                             std::size_t hidden_width, std::size_t out_width, Rng& rng);
    static GcinParams zeros_like(const GcinParams& p);
    /// Throws Error unless widths chain and all layers share one output width.
    void validate() const;
};

struct GcinCache {
    std::vector<MlpCache> layers;  // layers[k].inputs[0] is the aggregate W X^(k)
    std::size_t n = 0;
};

/// X^(k) = MLP^(k)(W X^(k-1)) for k = 1..K; readout sum_k mean_rows(X^(k)).
/// Throws Error naming the layer if a non-finite value appears.
std::vector<double> gcin_forward(const EdgeWeighting& w, const NodeFeatureMatrix& x0,
                                 const GcinParams& params, GcinCache* cache);

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(readout).
void gcin_backward(const EdgeWeighting& w, const GcinParams& params,
                   const GcinCache& cache, std::span<const double> d_readout,
                   GcinParams& grad);

/// Visits every parameter block (weights then bias, layer by layer).
template <typename MlpT, typename Fn>
void for_each_block(MlpT& m, Fn&& fn)
{
    for (auto& l : m.layers) {
        fn(std::span(l.weight));
        fn(std::span(l.bias));
    }
}

}  // namespace autoamg
