#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

#include "autoamg/sparse.hpp"

namespace autoamg {

/// Anisotropic diffusion -div(kappa grad u) = 1 on the unit square/cube with
/// zero Dirichlet data. The domain is cut into bx*by(*bz) equal blocks and
/// every block draws kappa = diag(10^(M r0), 10^(M r1)[, 10^(M r2)]) with
/// r uniform in [0, 1).
struct DiffusionSpec {
    int dim = 2;
    std::size_t nx = 2, ny = 2, nz = 1;
    std::size_t bx = 1, by = 1, bz = 1;
    int M = 1;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t size() const { return nx * ny * (dim == 3 ? nz : 1); }
};

/// Structural stand-in for a three-temperature radiation diffusion system:
/// three 3D diffusion blocks on one mesh coupled through diagonal blocks.
struct RadiationSurrogateSpec {
    std::size_t nx = 2, ny = 2, nz = 2;
    int M = 1;
    std::uint64_t seed = 0;
    double omega_er = 0.0;
    double omega_ei = 0.0;

    void validate() const;
    std::size_t size() const { return 3 * nx * ny * nz; }
};

using ProblemSpec = std::variant<DiffusionSpec, RadiationSurrogateSpec>;

struct LinearProblem {
    CsrMatrix a;
    Vector b;
    ProblemSpec spec;
};

LinearProblem gen_diffusion(const DiffusionSpec& spec);
LinearProblem gen_radiation_surrogate(const RadiationSurrogateSpec& spec);
LinearProblem generate(const ProblemSpec& spec);

/// Drops minimal entries while the matrix stays multiscale at delta and
/// returns the last multiscale iterate.
CsrMatrix boundary_matrix(const CsrMatrix& a, double delta);

nlohmann::json to_json(const ProblemSpec& spec);
/// A document carrying omega_er/omega_ei is a radiation surrogate spec.
ProblemSpec problem_spec_from_json(const nlohmann::json& j);

}  // namespace autoamg
