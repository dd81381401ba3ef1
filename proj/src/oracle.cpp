#include "autoamg/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "autoamg/format.hpp"
#include "autoamg/parallel.hpp"
#include "autoamg/rng.hpp"

namespace autoamg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::size_t parse_count(std::string_view s)
{
    const double v = parse_double(s);
    if (!(v >= 0.0) || v != std::floor(v)) {
        throw Error("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<double> theta_grid()
{
    std::vector<double> g;
    for (int k = 1; k <= 99; ++k) g.push_back(k / 100.0);
    return g;
}

std::uint64_t pmis_seed_for(std::string_view matrix_id) { return fnv1a(matrix_id); }

SolveOutcome solve_at_theta(const CsrMatrix& a, std::span<const double> b, double theta,
                            std::uint64_t pmis_seed, const SolverParams& params)
{
    SolveOutcome out;
    AmgParams amg = params.amg;
    amg.theta = theta;
    amg.seed = pmis_seed;
    const auto t0 = Clock::now();
    Hierarchy h;
    try {
        h = setup(a, amg);
    } catch (const Error&) {
        out.setup_seconds = seconds_since(t0);
        out.setup_failed = true;
        out.iterations = params.gmres.max_iter;
        return out;
    }
    out.setup_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    auto [x, report] = gmres(a, b, &h, params.gmres);
    out.solve_seconds = seconds_since(t1);
    out.converged = report.converged;
    out.iterations = report.converged ? report.iterations : params.gmres.max_iter;
    return out;
}

std::optional<std::size_t> ThetaRecord::iterations_at(double theta) const
{
    for (const auto& p : grid) {
        if (std::abs(p.theta - theta) < 1e-12) return p.iterations;
    }
    return std::nullopt;
}

void ThetaRecord::summarize()
{
    if (grid.empty()) throw Error("ThetaRecord: empty grid");
    std::stable_sort(grid.begin(), grid.end(),
                     [](const GridPoint& x, const GridPoint& y) { return x.theta < y.theta; });
    iters_min = grid.front().iterations;
    theta_opt = grid.front().theta;
    iters_max = grid.front().iterations;
    theta_at_max = grid.front().theta;
    for (const auto& p : grid) {
        if (p.iterations < iters_min) {
            iters_min = p.iterations;
            theta_opt = p.theta;
        }
        if (p.iterations > iters_max) {
            iters_max = p.iterations;
            theta_at_max = p.theta;
        }
    }
}

ThetaRecord grid_search(const CsrMatrix& a, std::span<const double> b,
                        std::string_view matrix_id, std::span<const double> grid,
                        const SolverParams& params, std::size_t threads)
{
    if (grid.empty()) throw Error("grid_search: empty grid");
    for (double t : grid) {
        if (!(t > 0.0 && t < 1.0)) throw Error("grid_search: theta outside (0, 1)");
    }
    ThetaRecord r;
    r.matrix_id = std::string(matrix_id);
    r.grid.resize(grid.size());
    const std::uint64_t seed = pmis_seed_for(matrix_id);
    parallel_for(grid.size(), threads, [&](std::size_t k) {
        const SolveOutcome o = solve_at_theta(a, b, grid[k], seed, params);
        r.grid[k] = GridPoint{grid[k], o.iterations, o.converged, o.time_seconds()};
    });
    r.summarize();
    return r;
}

std::string grid_csv(const ThetaRecord& r)
{
    std::string out = "matrix_id,theta,iterations,converged,time_seconds\n";
    for (const auto& p : r.grid) {
        out += r.matrix_id + "," + format_double(p.theta) + "," + std::to_string(p.iterations) +
               "," + (p.converged ? "1" : "0") + "," + format_double(p.time_seconds) + "\n";
    }
    return out;
}

std::string sensitivity_report(const ThetaRecord& r)
{
    std::string out = grid_csv(r);
    out += "summary,iters_min=" + std::to_string(r.iters_min) +
           ",theta_opt=" + format_double(r.theta_opt) +
           ",iters_max=" + std::to_string(r.iters_max) +
           ",theta_at_max=" + format_double(r.theta_at_max);
    for (double d : kDefaultThetas) {
        if (auto it = r.iterations_at(d)) {
            out += ",default_" + format_double(d) + "=" + std::to_string(*it);
        }
    }
    out += "\n";
    return out;
}

ThetaRecord parse_sensitivity_report(std::string_view csv)
{
    ThetaRecord r;
    std::optional<ThetaRecord> summary;
    auto lines = split(csv, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != "matrix_id,theta,iterations,converged,time_seconds") {
        throw Error("sensitivity report: missing header");
    }
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto fields = split(lines[ln], ',');
        const std::string where = "sensitivity report line " + std::to_string(ln + 1) + ": ";
        try {
            if (fields[0] == "summary") {
                ThetaRecord s;
                for (std::size_t f = 1; f < fields.size(); ++f) {
                    const auto eq = fields[f].find('=');
                    if (eq == std::string_view::npos) throw Error("bad summary field");
                    const auto key = fields[f].substr(0, eq);
                    const auto val = fields[f].substr(eq + 1);
                    if (key == "iters_min") s.iters_min = parse_count(val);
                    else if (key == "theta_opt") s.theta_opt = parse_double(val);
                    else if (key == "iters_max") s.iters_max = parse_count(val);
                    else if (key == "theta_at_max") s.theta_at_max = parse_double(val);
                    else if (!key.starts_with("default_")) throw Error("unknown summary field");
                }
                summary = s;
                continue;
            }
            if (summary) throw Error("data row after summary");
            if (fields.size() != 5) throw Error("expected 5 fields");
            if (r.grid.empty()) {
                r.matrix_id = std::string(fields[0]);
            } else if (fields[0] != r.matrix_id) {
                throw Error("mixed matrix ids");
            }
            GridPoint p;
            p.theta = parse_double(fields[1]);
            p.iterations = parse_count(fields[2]);
            if (fields[3] != "0" && fields[3] != "1") throw Error("converged must be 0 or 1");
            p.converged = fields[3] == "1";
            p.time_seconds = parse_double(fields[4]);
            r.grid.push_back(p);
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
    }
    if (r.grid.empty()) throw Error("sensitivity report: no data rows");
    r.summarize();
    if (summary && (summary->iters_min != r.iters_min || summary->theta_opt != r.theta_opt ||
                    summary->iters_max != r.iters_max ||
                    summary->theta_at_max != r.theta_at_max)) {
        throw Error("sensitivity report: summary row disagrees with data rows");
    }
    return r;
}

nlohmann::json summary_json(const ThetaRecord& r)
{
    nlohmann::json defaults = nlohmann::json::object();
    for (double d : kDefaultThetas) {
        if (auto it = r.iterations_at(d)) defaults[format_double(d)] = *it;
    }
    return {{"matrix_id", r.matrix_id},       {"theta_opt", r.theta_opt},
            {"iters_min", r.iters_min},       {"iters_max", r.iters_max},
            {"theta_at_max", r.theta_at_max}, {"defaults", defaults}};
}

BoundaryExperiment boundary_sensitivity_experiment(const DiffusionSpec& spec, double delta,
                                                   const BoundaryParams& params,
                                                   std::size_t threads)
{
    spec.validate();
    if (spec.size() > params.max_size) {
        throw Error("boundary experiment: n = " + std::to_string(spec.size()) +
                    " exceeds the dense-analysis limit " + std::to_string(params.max_size));
    }
    BoundaryExperiment e;
    e.matrix = boundary_matrix(gen_diffusion(spec).a, delta);
    const auto grid = theta_grid();
    e.points.resize(grid.size());
    const Vector b(e.matrix.n_rows, 1.0);
    parallel_for(grid.size(), threads, [&](std::size_t k) {
        AmgParams ap;
        ap.theta = grid[k];
        ap.max_levels = 2;
        ap.coarse_size_limit = 0;
        ap.seed = spec.seed;
        const Hierarchy h = setup(e.matrix, ap);
        BoundaryPoint& p = e.points[k];
        p.theta = grid[k];
        const auto s = stationary_solve(h, b, params.tol, params.max_iter);
        p.iterations = s.iterations;
        p.converged = s.converged;
        const auto th = tg_convergence_factor_theoretical(h);
        p.factor_theoretical = th.value;
        p.theoretical_converged = th.converged;
        p.factor_computed = tg_convergence_factor_computed(h, params.factor_iterations);
    });
    for (std::size_t k = 0; k + 1 < e.points.size(); ++k) {
        const double lo = static_cast<double>(
            std::max<std::size_t>(1, std::min(e.points[k].iterations, e.points[k + 1].iterations)));
        const double hi = static_cast<double>(
            std::max(e.points[k].iterations, e.points[k + 1].iterations));
        if (hi / lo > e.jump_ratio) {
            e.jump_ratio = hi / lo;
            e.theta_star = e.points[k].theta;
        }
    }
    return e;
}

std::string boundary_csv(const BoundaryExperiment& e)
{
    std::string out =
        "theta,iterations,converged,factor_theoretical,theoretical_converged,factor_computed\n";
    for (const auto& p : e.points) {
        out += format_double(p.theta) + "," + std::to_string(p.iterations) + "," +
               (p.converged ? "1" : "0") + "," + format_double(p.factor_theoretical) + "," +
               (p.theoretical_converged ? "1" : "0") + "," + format_double(p.factor_computed) +
               "\n";
    }
    return out;
}

}  // namespace autoamg
