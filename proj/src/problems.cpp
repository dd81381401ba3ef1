#include "autoamg/problems.hpp"

#include <array>
#include <cmath>

#include "autoamg/rng.hpp"

namespace autoamg {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw Error("invalid problem spec: " + what);
}

/// Off-diagonal couplings of one row plus the Dirichlet share of its diagonal.
struct RowDraft {
    std::vector<std::pair<std::size_t, double>> off;  // sorted by column
    double boundary = 0.0;
};

/// The diagonal is the sum of |off-diagonals| in column order plus the
/// boundary share, so weak diagonal dominance holds in floating point.
CsrMatrix finalize(std::size_t n, std::size_t offset,
                   const std::vector<RowDraft>& rows)
{
    CsrMatrix a;
    a.n_rows = a.n_cols = n;
    a.row_ptr.assign(n + 1, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = offset + r;
        double diag = 0.0;
        for (const auto& [c, v] : rows[r].off) diag += std::abs(v);
        diag += rows[r].boundary;
        bool placed = false;
        for (const auto& [c, v] : rows[r].off) {
            if (!placed && c > i) {
                a.col_idx.push_back(i);
                a.values.push_back(diag);
                placed = true;
            }
            a.col_idx.push_back(c);
            a.values.push_back(v);
        }
        if (!placed) {
            a.col_idx.push_back(i);
            a.values.push_back(diag);
        }
        a.row_ptr[r + 1] = a.col_idx.size();
    }
    return a;
}

double harmonic(double a, double b) { return 2.0 * (a * b) / (a + b); }

/// Row drafts of the cell-centred finite-volume diffusion operator. Ghost
/// cells outside the domain carry the boundary value at one cell width.
std::vector<RowDraft> diffusion_rows(const DiffusionSpec& s, Rng& rng)
{
    const std::size_t nz = s.dim == 3 ? s.nz : 1;
    const std::size_t bz = s.dim == 3 ? s.bz : 1;
    const std::size_t n_blocks = s.bx * s.by * bz;

    std::vector<std::array<double, 3>> kappa(n_blocks);
    for (auto& k : kappa) {
        for (int d = 0; d < s.dim; ++d) k[d] = std::pow(10.0, s.M * rng.uniform());
        if (s.dim == 2) k[2] = 1.0;
    }

    const std::array<std::size_t, 3> n{s.nx, s.ny, nz};
    const std::array<double, 3> h{1.0 / double(s.nx), 1.0 / double(s.ny),
                                  1.0 / double(nz)};
    std::array<double, 3> geom{};
    for (int d = 0; d < 3; ++d) {
        double area = 1.0;
        for (int e = 0; e < s.dim; ++e) {
            if (e != d) area *= h[e];
        }
        geom[d] = area / h[d];
    }

    auto block_of = [&](std::size_t i, std::size_t j, std::size_t k) {
        std::size_t bi = i * s.bx / s.nx;
        std::size_t bj = j * s.by / s.ny;
        std::size_t bk = k * bz / nz;
        return bi + s.bx * (bj + s.by * bk);
    };
    auto index = [&](std::size_t i, std::size_t j, std::size_t k) {
        return i + s.nx * (j + s.ny * k);
    };

    std::vector<RowDraft> rows(s.size());
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j < s.ny; ++j) {
            for (std::size_t i = 0; i < s.nx; ++i) {
                const std::array<std::size_t, 3> c{i, j, k};
                const auto& kc = kappa[block_of(i, j, k)];
                auto& row = rows[index(i, j, k)];
                row.off.reserve(2 * static_cast<std::size_t>(s.dim));
                // Neighbours in increasing column order: -z, -y, -x, +x, +y, +z.
                const int order[6][2] = {{2, -1}, {1, -1}, {0, -1},
                                         {0, +1}, {1, +1}, {2, +1}};
                for (const auto& [d, step] : order) {
                    if (d >= s.dim) continue;
                    const bool outside = step < 0 ? c[d] == 0 : c[d] + 1 == n[d];
                    if (outside) {
                        row.boundary += geom[d] * kc[d];
                        continue;
                    }
                    auto nb = c;
                    nb[d] = step < 0 ? c[d] - 1 : c[d] + 1;
                    const auto& kn = kappa[block_of(nb[0], nb[1], nb[2])];
                    const double t = geom[d] * harmonic(kc[d], kn[d]);
                    row.off.emplace_back(index(nb[0], nb[1], nb[2]), -t);
                }
            }
        }
    }
    return rows;
}

}  // namespace

void DiffusionSpec::validate() const
{
    require(dim == 2 || dim == 3, "dim must be 2 or 3");
    require(nx >= 2 && ny >= 2, "nx, ny must be >= 2");
    require(bx >= 1 && bx <= nx && by >= 1 && by <= ny, "need 1 <= b <= n per axis");
    if (dim == 3) {
        require(nz >= 2, "nz must be >= 2");
        require(bz >= 1 && bz <= nz, "need 1 <= bz <= nz");
    }
    require(M >= 0, "M must be >= 0");
}

void RadiationSurrogateSpec::validate() const
{
    require(nx >= 2 && ny >= 2 && nz >= 2, "nx, ny, nz must be >= 2");
    require(M >= 0, "M must be >= 0");
    require(omega_er >= 0.0 && omega_ei >= 0.0, "couplings must be >= 0");
}

LinearProblem gen_diffusion(const DiffusionSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    auto rows = diffusion_rows(spec, rng);
    LinearProblem p;
    p.a = finalize(spec.size(), 0, rows);
    p.b.assign(spec.size(), 1.0);
    p.spec = spec;
    return p;
}

LinearProblem gen_radiation_surrogate(const RadiationSurrogateSpec& spec)
{
    spec.validate();
    const std::size_t n = spec.nx * spec.ny * spec.nz;
    DiffusionSpec block;
    block.dim = 3;
    block.nx = spec.nx;
    block.ny = spec.ny;
    block.nz = spec.nz;
    block.M = spec.M;

    Rng rng(spec.seed);
    auto radiation = diffusion_rows(block, rng);
    auto electron = diffusion_rows(block, rng);
    auto ion = diffusion_rows(block, rng);

    std::vector<double> w_er(n), w_ei(n);
    for (std::size_t i = 0; i < n; ++i) {
        w_er[i] = spec.omega_er * rng.uniform();
        w_ei[i] = spec.omega_ei * rng.uniform();
    }
    const bool couple_er = spec.omega_er > 0.0;
    const bool couple_ei = spec.omega_ei > 0.0;

    auto shift = [](RowDraft& r, std::size_t by) {
        for (auto& e : r.off) e.first += by;
    };

    std::vector<RowDraft> rows;
    rows.reserve(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        RowDraft r = radiation[i];
        if (couple_er) r.off.emplace_back(n + i, -w_er[i]);
        rows.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < n; ++i) {
        RowDraft r;
        r.boundary = electron[i].boundary;
        if (couple_er) r.off.emplace_back(i, -w_er[i]);
        shift(electron[i], n);
        r.off.insert(r.off.end(), electron[i].off.begin(), electron[i].off.end());
        if (couple_ei) r.off.emplace_back(2 * n + i, -w_ei[i]);
        rows.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < n; ++i) {
        RowDraft r;
        r.boundary = ion[i].boundary;
        if (couple_ei) r.off.emplace_back(n + i, -w_ei[i]);
        shift(ion[i], 2 * n);
        r.off.insert(r.off.end(), ion[i].off.begin(), ion[i].off.end());
        rows.push_back(std::move(r));
    }

    LinearProblem p;
    p.a = finalize(3 * n, 0, rows);
    p.b.assign(3 * n, 1.0);
    p.spec = spec;
    return p;
}

LinearProblem generate(const ProblemSpec& spec)
{
    return std::visit(
        [](const auto& s) -> LinearProblem {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DiffusionSpec>) {
                return gen_diffusion(s);
            } else {
                return gen_radiation_surrogate(s);
            }
        },
        spec);
}

CsrMatrix boundary_matrix(const CsrMatrix& a, double delta)
{
    if (!is_multiscale(a, delta)) {
        throw Error("boundary_matrix: input is single-scale at delta = " +
                    std::to_string(delta));
    }
    CsrMatrix current = a;
    for (;;) {
        CsrMatrix next = drop_min_entry(current);
        if (!is_multiscale(next, delta)) return current;
        current = std::move(next);
    }
}

nlohmann::json to_json(const ProblemSpec& spec)
{
    if (const auto* d = std::get_if<DiffusionSpec>(&spec)) {
        return {{"dim", d->dim}, {"nx", d->nx}, {"ny", d->ny}, {"nz", d->nz},
                {"bx", d->bx},   {"by", d->by}, {"bz", d->bz}, {"M", d->M},
                {"seed", d->seed}};
    }
    const auto& r = std::get<RadiationSurrogateSpec>(spec);
    return {{"dim", 3},        {"nx", r.nx},
            {"ny", r.ny},      {"nz", r.nz},
            {"M", r.M},        {"seed", r.seed},
            {"omega_er", r.omega_er}, {"omega_ei", r.omega_ei}};
}

ProblemSpec problem_spec_from_json(const nlohmann::json& j)
{
    try {
        if (j.contains("omega_er") || j.contains("omega_ei")) {
            RadiationSurrogateSpec r;
            r.nx = j.at("nx").get<std::size_t>();
            r.ny = j.value("ny", r.nx);
            r.nz = j.value("nz", r.nx);
            r.M = j.at("M").get<int>();
            r.seed = j.value("seed", std::uint64_t{0});
            r.omega_er = j.value("omega_er", 0.0);
            r.omega_ei = j.value("omega_ei", 0.0);
            r.validate();
            return r;
        }
        DiffusionSpec d;
        d.dim = j.at("dim").get<int>();
        d.nx = j.at("nx").get<std::size_t>();
        d.ny = j.value("ny", d.nx);
        d.nz = j.value("nz", d.dim == 3 ? d.nx : std::size_t{1});
        d.bx = j.value("bx", std::size_t{1});
        d.by = j.value("by", d.bx);
        d.bz = j.value("bz", d.dim == 3 ? d.bx : std::size_t{1});
        d.M = j.at("M").get<int>();
        d.seed = j.value("seed", std::uint64_t{0});
        d.validate();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid problem spec JSON: ") + e.what());
    }
}

}  // namespace autoamg
