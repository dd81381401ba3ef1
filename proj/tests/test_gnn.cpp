#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>

#include "autoamg/gnn.hpp"
#include "support.hpp"

using namespace autoamg;

namespace {

Affine affine(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b)
{
    return Affine{in, out, std::move(w), std::move(b)};
}

Mlp identity_mlp(std::size_t d)
{
    std::vector<double> w(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
    Mlp m;
    m.layers.push_back(affine(d, d, std::move(w), std::vector<double>(d, 0.0)));
    m.hidden = Activation::Identity;
    return m;
}

NodeFeatureMatrix random_features(Rng& rng, std::size_t n, std::size_t d)
{
    NodeFeatureMatrix x(n, d);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    return x;
}

/// Dense message passing: X <- act-MLP(W X), readout summed row means.
std::vector<double> dense_forward(const support::Dense& w, NodeFeatureMatrix x, const GcinParams& p)
{
    std::vector<double> readout(p.out_width(), 0.0);
    for (const auto& mlp : p.layers) {
        NodeFeatureMatrix m(x.n, x.d);
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t j = 0; j < x.n; ++j)
                for (std::size_t c = 0; c < x.d; ++c) m(i, c) += w(i, j) * x(j, c);
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            const Affine& a = mlp.layers[l];
            NodeFeatureMatrix y(m.n, a.out);
            for (std::size_t i = 0; i < m.n; ++i)
                for (std::size_t q = 0; q < a.out; ++q) {
                    double s = a.bias[q];
                    for (std::size_t r = 0; r < a.in; ++r) s += m(i, r) * a.weight[r * a.out + q];
                    if (l + 1 < mlp.layers.size() && mlp.hidden == Activation::Tanh) s = std::tanh(s);
                    y(i, q) = s;
                }
            m = std::move(y);
        }
        x = std::move(m);
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t c = 0; c < x.d; ++c) readout[c] += x(i, c) / static_cast<double>(x.n);
    }
    return readout;
}

double dot(const std::vector<double>& a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

template <typename Fn>
void for_each_param(GcinParams& p, Fn&& fn)
{
    for (auto& m : p.layers) for_each_block(m, [&](std::span<double> blk) {
            for (double& v : blk) fn(v);
        });
}

std::vector<double> flat(GcinParams& p)
{
    std::vector<double> out;
    for_each_param(p, [&](double& v) { out.push_back(v); });
    return out;
}

CsrMatrix diffusion(int dim, std::size_t n, std::size_t b, int M, std::uint64_t seed)
{
    DiffusionSpec s;
    s.dim = dim;
    s.nx = s.ny = n;
    s.nz = dim == 3 ? n : 1;
    s.bx = s.by = b;
    s.bz = dim == 3 ? b : 1;
    s.M = M;
    s.seed = seed;
    return gen_diffusion(s).a;
}

}  // namespace

TEST_CASE("node features of simple rows")
{
    const auto id = init_node_features(CsrMatrix::identity(4));
    REQUIRE(id.n == 4);
    REQUIRE(id.d == kNodeFeatureWidth);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::vector<double>(id.row(i).begin(), id.row(i).end()) == std::vector<double>{1, 1, 0, 0, 0, 0});

    const CsrMatrix lap = support::poisson2d(5);
    const auto x = init_node_features(lap);
    const std::size_t c = 12;  // interior cell
    CHECK(x(c, 0) == 1.0);
    CHECK(x(c, 2) == 1.0);
    CHECK(x(c, 3) == 0.0);
    CHECK(x(c, 4) == 1.0);
    CHECK(x(c, 5) == 0.25);
    // corner: two neighbours, same diagonal
    CHECK(x(0, 1) == 1.0);
    CHECK(x(0, 2) == 0.5);
    CHECK(x(0, 5) == doctest::Approx(0.125).epsilon(1e-6));

    // off-diagonals spanning 10^4 give 4/16
    const CsrMatrix wide = CsrMatrix::from_dense(3, 3, std::vector<double>{2, -1, -1e-4, -1, 2, 0, -1e-4, 0, 2});
    CHECK(init_node_features(wide)(0, 3) == doctest::Approx(0.25).epsilon(1e-6));
    // a diagonal 10^-8 of the largest lands at 1 - 8/16
    const CsrMatrix small = CsrMatrix::from_dense(2, 2, std::vector<double>{1, 0, 0, -1e-8});
    const auto xs = init_node_features(small);
    CHECK(xs(1, 0) == -1.0);
    CHECK(xs(1, 1) == doctest::Approx(0.5).epsilon(1e-6));

    CHECK_THROWS_AS(init_node_features(CsrMatrix::from_dense(2, 2, std::vector<double>{0, 1, 1, 1})), Error);
}

TEST_CASE("edge weights")
{
    const CsrMatrix a = CsrMatrix::from_dense(3, 3, std::vector<double>{4, -1, -2, -1, 2, 0, -2, 0, 8});
    const auto w = edge_weights(a).w;
    CHECK(w.at(0, 0) == 1.0);
    CHECK(w.at(0, 1) == -0.25);
    CHECK(w.at(0, 2) == -0.5);
    CHECK(w.at(2, 0) == -0.25);
    CHECK(edge_weights(CsrMatrix::identity(3)).w == CsrMatrix::identity(3));

    // missing diagonal is added with weight 0
    const CsrMatrix off = CsrMatrix::from_triplets(2, 2, {{0, 1, -3.0}, {1, 0, 2.0}, {1, 1, 1.0}});
    const auto wo = edge_weights(off).w;
    CHECK(has_full_diagonal(wo));
    CHECK(wo.at(0, 0) == 0.0);
    CHECK(wo.at(0, 1) == -1.0);
    CHECK(wo.at(1, 1) == 0.5);

    CHECK_THROWS_AS(edge_weights(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}})), Error);

    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const CsrMatrix r = support::random_mmatrix(rng, rng.uniform_int(1, 30), 0.3, 8.0);
        const auto wr = edge_weights(r).w;
        CHECK(wr.row_ptr == r.row_ptr);
        CHECK(wr.col_idx == r.col_idx);
        for (double v : wr.values) CHECK(std::abs(v) <= 1.0);
    }
}

TEST_CASE("features and weights are scale invariant")
{
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const CsrMatrix a = trial % 2 ? diffusion(2, rng.uniform_int(3, 16), 2, 5, trial)
                                      : support::random_mmatrix(rng, rng.uniform_int(2, 40), 0.3, 6.0);
        const auto x = init_node_features(a);
        const auto w = edge_weights(a);
        for (double c : {1e-12, 0.1, 3.0, 7.77, 1e10}) {
            CHECK(init_node_features(scaled(a, c)).data == x.data);
            CHECK(edge_weights(scaled(a, c)).w == w.w);
        }
    }
}

TEST_CASE("degenerate layer returns the mean of the inputs")
{
    Rng rng(1);
    const auto x0 = random_features(rng, 5, 3);
    GcinParams p;
    p.layers.push_back(identity_mlp(3));
    const auto g = gcin_forward(edge_weights(CsrMatrix::identity(5)), x0, p, nullptr);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0.0;
        for (std::size_t i = 0; i < 5; ++i) m += x0(i, c);
        CHECK(g[c] == doctest::Approx(m / 5).epsilon(1e-14));
    }
}

TEST_CASE("forward matches a dense oracle on a path")
{
    const CsrMatrix w = CsrMatrix::from_dense(3, 3, std::vector<double>{1, -0.5, 0, -0.25, 1, -0.75, 0, 0.3, 0.9});
    Rng rng(2);
    const auto x0 = random_features(rng, 3, 2);
    const GcinParams p = GcinParams::random(2, 2, 4, 3, rng);
    GcinParams q = p;
    for (auto& m : q.layers)
        for (auto& l : m.layers)
            for (double& b : l.bias) b = rng.uniform(-0.5, 0.5);
    const auto g = gcin_forward(EdgeWeighting{w}, x0, q, nullptr);
    const auto ref = dense_forward(support::Dense(w), x0, q);
    CHECK(support::rel_diff(g, ref) <= 1e-14);
}

TEST_CASE("readout is invariant under node permutation")
{
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const CsrMatrix a = diffusion(2, 6, 3, 4, trial);
        const std::size_t n = a.n_rows;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(0, i - 1)]);
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
                t.push_back({perm[i], perm[a.col_idx[k]], a.values[k]});
        const CsrMatrix pa = CsrMatrix::from_triplets(n, n, std::move(t));

        const GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 8, 8, rng);
        const auto g = gcin_forward(edge_weights(a), init_node_features(a), p, nullptr);
        const auto gp = gcin_forward(edge_weights(pa), init_node_features(pa), p, nullptr);
        CHECK(support::rel_diff(gp, g) <= 1e-12);
    }
}

TEST_CASE("backward matches central finite differences")
{
    Rng rng(10);
    const CsrMatrix a = support::random_mmatrix(rng, 10, 0.4, 3.0);
    const auto w = edge_weights(a);
    const auto x0 = init_node_features(a);
    GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 5, 4, rng);
    for_each_param(p, [&](double& v) { v += rng.uniform(-0.3, 0.3); });
    std::vector<double> r(4);
    for (double& v : r) v = rng.uniform(-1, 1);

    GcinCache cache;
    gcin_forward(w, x0, p, &cache);
    GcinParams grad = GcinParams::zeros_like(p);
    gcin_backward(w, p, cache, r, grad);
    const auto g = flat(grad);

    const double h = 1e-4;
    std::size_t idx = 0;
    double worst = 0.0;
    for_each_param(p, [&](double& v) {
        const double saved = v;
        v = saved + h;
        const double up = dot(r, gcin_forward(w, x0, p, nullptr));
        v = saved - h;
        const double down = dot(r, gcin_forward(w, x0, p, nullptr));
        v = saved;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(g[idx]), 1e-3});
        worst = std::max(worst, std::abs(fd - g[idx]) / scale);
        ++idx;
    });
    CHECK(idx == g.size());
    CHECK(worst < 1e-4);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients")
{
    Rng rng(11);
    const CsrMatrix a = support::poisson2d(4);
    const GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 6, 6, rng);
    GcinCache cache;
    gcin_forward(edge_weights(a), init_node_features(a), p, &cache);
    GcinParams grad = GcinParams::zeros_like(p);
    gcin_backward(edge_weights(a), p, cache, std::vector<double>(6, 0.0), grad);
    for (double v : flat(grad)) CHECK(v == 0.0);
}

TEST_CASE("linear layers make the readout affine in each parameter")
{
    Rng rng(12);
    const CsrMatrix a = support::random_mmatrix(rng, 8, 0.5, 2.0);
    const auto w = edge_weights(a);
    const auto x0 = init_node_features(a);
    GcinParams p = GcinParams::random(2, kNodeFeatureWidth, 3, 3, rng);
    for (auto& m : p.layers) m.hidden = Activation::Identity;
    const std::vector<double> r{0.3, -1.0, 0.6};

    GcinCache cache;
    const double base = dot(r, gcin_forward(w, x0, p, &cache));
    GcinParams grad = GcinParams::zeros_like(p);
    gcin_backward(w, p, cache, r, grad);
    const auto g = flat(grad);
    std::size_t idx = 0;
    for_each_param(p, [&](double& v) {
        const double saved = v;
        for (double t : {-2.0, 0.5, 3.0}) {
            v = saved + t;
            const double moved = dot(r, gcin_forward(w, x0, p, nullptr));
            CHECK(moved - base == doctest::Approx(t * g[idx]).epsilon(1e-9).scale(std::abs(base) + 1));
        }
        v = saved;
        ++idx;
    });
}

TEST_CASE("non-finite values are reported with the layer")
{
    const CsrMatrix a = support::poisson2d(3);
    Rng rng(5);
    GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 4, 4, rng);
    for (auto& l : p.layers[1].layers)
        for (double& v : l.weight) v = 1e300;
    p.layers[1].hidden = Activation::Identity;
    try {
        gcin_forward(edge_weights(a), init_node_features(a), p, nullptr);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
}

TEST_CASE("parameter validation")
{
    Rng rng(6);
    GcinParams p = GcinParams::random(2, 6, 4, 5, rng);
    p.validate();
    GcinParams bad = p;
    bad.layers[1] = Mlp::random(std::vector<std::size_t>{5, 4, 3}, Activation::Tanh, rng);
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = p;
    bad.layers[0].layers[0].bias.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(gcin_forward(edge_weights(CsrMatrix::identity(3)), NodeFeatureMatrix(3, 2), p, nullptr), Error);
}

TEST_CASE("generated problems give finite readouts")
{
    Rng rng(7);
    const GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 32, 32, rng);
    for (int M : {0, 3, 6}) {
        for (int dim : {2, 3}) {
            const CsrMatrix a = diffusion(dim, dim == 2 ? 20 : 8, 4, M, M + dim);
            for (double v : gcin_forward(edge_weights(a), init_node_features(a), p, nullptr))
                CHECK(std::isfinite(v));
        }
    }
    RadiationSurrogateSpec r;
    r.nx = r.ny = r.nz = 5;
    r.M = 6;
    r.omega_er = r.omega_ei = 100;
    const CsrMatrix ra = gen_radiation_surrogate(r).a;
    for (double v : gcin_forward(edge_weights(ra), init_node_features(ra), p, nullptr)) CHECK(std::isfinite(v));
}

TEST_CASE("forward cost grows linearly with nnz")
{
    Rng rng(9);
    const GcinParams p = GcinParams::random(3, kNodeFeatureWidth, 32, 32, rng);
    auto time_of = [&](const CsrMatrix& a) {
        const auto w = edge_weights(a);
        const auto x = init_node_features(a);
        gcin_forward(w, x, p, nullptr);
        double best = 1e9;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            gcin_forward(w, x, p, nullptr);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    DiffusionSpec s;
    s.dim = 2;
    s.nx = 128;
    s.ny = 128;
    const CsrMatrix a = gen_diffusion(s).a;
    s.ny = 256;
    const CsrMatrix b = gen_diffusion(s).a;
    const double nnz_ratio = static_cast<double>(b.nnz()) / static_cast<double>(a.nnz());
    REQUIRE(nnz_ratio == doctest::Approx(2.0).epsilon(0.02));
    const double ratio = time_of(b) / time_of(a);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 3.0);
}
