#include "autoamg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "autoamg/format.hpp"
#include "autoamg/matrix_market.hpp"
#include "autoamg/parallel.hpp"
#include "autoamg/rng.hpp"

namespace autoamg {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::pair<std::size_t, std::size_t> range_from_json(const json& j, const char* key,
                                                    std::pair<std::size_t, std::size_t> dflt)
{
    if (!j.contains(key)) return dflt;
    const auto& v = j.at(key);
    if (v.is_number_integer()) {
        const auto x = v.get<std::size_t>();
        return {x, x};
    }
    if (!v.is_array() || v.size() != 2) {
        throw Error(std::string("gen config: '") + key + "' must be an integer or [lo, hi]");
    }
    return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

fs::path base_dir_of(const fs::path& manifest_path)
{
    auto p = manifest_path.parent_path();
    return p.empty() ? fs::path(".") : p;
}

SolveOutcome timed_solve(const CsrMatrix& a, const Vector& b, double theta,
                         std::uint64_t seed, const SolverParams& solver, std::size_t repeats)
{
    std::vector<SolveOutcome> runs;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, repeats); ++r) {
        runs.push_back(solve_at_theta(a, b, theta, seed, solver));
    }
    std::sort(runs.begin(), runs.end(), [](const SolveOutcome& x, const SolveOutcome& y) {
        return x.time_seconds() < y.time_seconds();
    });
    return runs[runs.size() / 2];
}

}  // namespace

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void DatasetManifest::validate(const std::optional<fs::path>& base_dir) const
{
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.matrix_id.empty()) throw Error("manifest: empty matrix_id");
        if (!seen.insert(e.matrix_id).second) {
            throw Error("manifest: duplicate matrix_id '" + e.matrix_id + "'");
        }
        if (e.split != "train" && e.split != "test") {
            throw Error("manifest: entry '" + e.matrix_id + "' has unknown split '" + e.split + "'");
        }
        if (e.theta_opt && !(*e.theta_opt > 0.0 && *e.theta_opt < 1.0)) {
            throw Error("manifest: theta_opt of '" + e.matrix_id + "' is outside (0, 1)");
        }
        if (base_dir && !fs::exists(*base_dir / e.matrix_path)) {
            throw Error("manifest: matrix file of '" + e.matrix_id + "' not found: " +
                        (*base_dir / e.matrix_path).string());
        }
    }
}

json to_json(const DatasetManifest& m)
{
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back({
            {"matrix_id", e.matrix_id},
            {"matrix_path", e.matrix_path},
            {"spec", e.spec},
            {"split", e.split},
            {"theta_opt", e.theta_opt ? json(*e.theta_opt) : json(nullptr)},
            {"iters_at_opt", e.iters_at_opt ? json(*e.iters_at_opt) : json(nullptr)},
            {"grid_csv", e.grid_csv},
        });
    }
    return {{"version", m.version}, {"entries", entries}};
}

DatasetManifest manifest_from_json(const json& j)
{
    try {
        DatasetManifest m;
        m.version = j.at("version").get<int>();
        if (m.version != 1) throw Error("manifest: unsupported version " + std::to_string(m.version));
        for (const auto& ej : j.at("entries")) {
            ManifestEntry e;
            e.matrix_id = ej.at("matrix_id").get<std::string>();
            e.matrix_path = ej.at("matrix_path").get<std::string>();
            e.spec = ej.value("spec", json(nullptr));
            e.split = ej.at("split").get<std::string>();
            if (ej.contains("theta_opt") && !ej["theta_opt"].is_null()) {
                e.theta_opt = ej["theta_opt"].get<double>();
            }
            if (ej.contains("iters_at_opt") && !ej["iters_at_opt"].is_null()) {
                e.iters_at_opt = ej["iters_at_opt"].get<std::size_t>();
            }
            e.grid_csv = ej.value("grid_csv", std::string());
            m.entries.push_back(std::move(e));
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("manifest: ") + e.what());
    }
}

DatasetManifest load_manifest(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw Error(path.string() + ": parse error at byte " + std::to_string(e.byte));
    }
    return manifest_from_json(j);
}

void save_manifest(const DatasetManifest& m, const fs::path& path)
{
    write_text(path, to_json(m).dump(2) + "\n");
}

GenConfig GenConfig::from_json(const json& j)
{
    try {
        GenConfig c;
        c.count = j.value("count", c.count);
        c.test_count = j.value("test_count", c.test_count);
        c.problem = j.value("problem", c.problem);
        c.dim = j.value("dim", c.dim);
        std::tie(c.nx_lo, c.nx_hi) = range_from_json(j, "nx", {c.nx_lo, c.nx_hi});
        std::tie(c.bx_lo, c.bx_hi) = range_from_json(j, "bx", {c.bx_lo, c.bx_hi});
        c.M = j.value("M", c.M);
        c.omega_er = j.value("omega_er", c.omega_er);
        c.omega_ei = j.value("omega_ei", c.omega_ei);
        c.id_prefix = j.value("id_prefix", c.id_prefix);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("gen config: ") + e.what());
    }
}

void GenConfig::validate() const
{
    if (problem != "diffusion" && problem != "radiation") {
        throw Error("gen config: problem must be 'diffusion' or 'radiation'");
    }
    if (problem == "diffusion" && dim != 2 && dim != 3) throw Error("gen config: dim must be 2 or 3");
    if (nx_lo < 2 || nx_lo > nx_hi) throw Error("gen config: bad nx range");
    if (bx_lo < 1 || bx_lo > bx_hi) throw Error("gen config: bad bx range");
    if (M < 0) throw Error("gen config: M must be >= 0");
}

std::string matrix_id_for(const GenConfig& cfg, std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return cfg.id_prefix + buf;
}

ProblemSpec draw_spec(const GenConfig& cfg, std::size_t index)
{
    Rng rng(index);
    auto draw = [&](std::size_t lo, std::size_t hi) {
        return static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    };
    const std::size_t nx = draw(cfg.nx_lo, cfg.nx_hi);
    if (cfg.problem == "radiation") {
        RadiationSurrogateSpec r;
        r.nx = r.ny = r.nz = nx;
        r.M = cfg.M;
        r.seed = index;
        r.omega_er = cfg.omega_er;
        r.omega_ei = cfg.omega_ei;
        r.validate();
        return r;
    }
    DiffusionSpec d;
    d.dim = cfg.dim;
    d.nx = d.ny = nx;
    d.nz = cfg.dim == 3 ? nx : 1;
    const std::size_t bx = std::min(draw(cfg.bx_lo, cfg.bx_hi), nx);
    d.bx = d.by = bx;
    d.bz = cfg.dim == 3 ? bx : 1;
    d.M = cfg.M;
    d.seed = index;
    d.validate();
    return d;
}

std::string group_of(const json& spec)
{
    if (spec.is_null()) return "all";
    if (spec.contains("omega_er")) return "radiation";
    return std::to_string(spec.value("dim", 2)) + "D";
}

DatasetManifest cmd_gen(const GenConfig& cfg, const fs::path& out_dir, Logger log)
{
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "matrices", ec);
    if (ec) throw Error("gen: cannot create output directory " + out_dir.string() + ": " + ec.message());

    DatasetManifest m;
    const std::size_t total = cfg.count + cfg.test_count;
    if (total == 0) log << "warning: gen config requests no matrices; writing an empty manifest\n";
    for (std::size_t i = 0; i < total; ++i) {
        const ProblemSpec spec = draw_spec(cfg, i);
        const LinearProblem p = generate(spec);
        ManifestEntry e;
        e.matrix_id = matrix_id_for(cfg, i);
        e.matrix_path = "matrices/" + e.matrix_id + ".mtx";
        e.spec = to_json(spec);
        e.split = i < cfg.count ? "train" : "test";
        write_matrix_market(p.a, out_dir / e.matrix_path);
        log << "gen " << e.matrix_id << " n=" << p.a.n_rows << " nnz=" << p.a.nnz() << "\n";
        m.entries.push_back(std::move(e));
    }
    save_manifest(m, out_dir / "manifest.json");
    return m;
}

DatasetManifest cmd_gridsearch(const fs::path& manifest_path, const GridsearchOptions& opt,
                               Logger log)
{
    DatasetManifest m = load_manifest(manifest_path);
    const fs::path base = base_dir_of(manifest_path);
    m.validate(base);
    const auto grid = theta_grid();
    for (auto& e : m.entries) {
        if (e.theta_opt && !opt.force) continue;
        const CsrMatrix a = read_matrix_market(base / e.matrix_path);
        const Vector b(a.n_rows, 1.0);
        const auto t0 = Clock::now();
        const ThetaRecord r = grid_search(a, b, e.matrix_id, grid, opt.solver, opt.threads);
        e.theta_opt = r.theta_opt;
        e.iters_at_opt = r.iters_min;
        e.grid_csv = "grids/" + e.matrix_id + ".csv";
        write_text(base / e.grid_csv, grid_csv(r));
        // Save as we go so an interrupted run keeps its labels.
        save_manifest(m, manifest_path);
        log << "gridsearch " << e.matrix_id << " theta_opt=" << format_double(r.theta_opt)
            << " iters=" << r.iters_min << " max=" << r.iters_max << " ("
            << std::chrono::duration<double>(Clock::now() - t0).count() << " s)\n";
    }
    save_manifest(m, manifest_path);
    return m;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c)
{
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
        c.seed = j.value("seed", c.seed);
        if (j.contains("architecture")) {
            const auto& a = j["architecture"];
            c.arch.gcin_layers = a.value("gcin_layers", c.arch.gcin_layers);
            c.arch.gcin_hidden = a.value("gcin_hidden", c.arch.gcin_hidden);
            c.arch.gcin_out = a.value("gcin_out", c.arch.gcin_out);
            c.arch.head_hidden = a.value("head_hidden", c.arch.head_hidden);
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("train config: ") + e.what());
    }
}

TrainedModel cmd_train(const fs::path& manifest_path, const TrainConfig& cfg,
                       const fs::path& model_path, const fs::path& loss_csv_path, Logger log)
{
    const DatasetManifest m = load_manifest(manifest_path);
    const fs::path base = base_dir_of(manifest_path);
    m.validate(base);
    std::vector<const ManifestEntry*> train_entries;
    std::string missing;
    for (const auto& e : m.entries) {
        if (e.split != "train") continue;
        if (!e.theta_opt) missing += (missing.empty() ? "" : ", ") + e.matrix_id;
        train_entries.push_back(&e);
    }
    if (!missing.empty()) throw Error("train: unlabeled training matrices: " + missing);

    std::vector<LabeledGraph> data(train_entries.size());
    parallel_for(train_entries.size(), cfg.threads, [&](std::size_t i) {
        const ManifestEntry& e = *train_entries[i];
        data[i].id = e.matrix_id;
        data[i].graph = extract_graph(read_matrix_market(base / e.matrix_path));
        data[i].target = *e.theta_opt;
    });
    log << "train on " << data.size() << " matrices, " << cfg.epochs << " epochs\n";
    TrainedModel model = train(data, cfg);
    save_model(model, model_path);
    write_text(loss_csv_path, loss_curve_csv(model));
    const auto& best = model.loss_curve[model.best_epoch];
    log << "best epoch " << model.best_epoch << " train_loss=" << format_double(best.train_loss);
    if (best.val_loss) log << " val_loss=" << format_double(*best.val_loss);
    log << "\n";
    return model;
}

std::vector<EvalRow> eval_table(const std::vector<EvalMatrixRow>& rows)
{
    // group -> matrix_id -> rows, in first-seen order
    std::vector<std::string> groups;
    std::map<std::string, std::vector<std::string>> ids;
    std::map<std::string, std::vector<const EvalMatrixRow*>> by_id;
    for (const auto& r : rows) {
        if (!ids.count(r.group)) groups.push_back(r.group);
        auto& list = ids[r.group];
        if (std::find(list.begin(), list.end(), r.matrix_id) == list.end()) {
            list.push_back(r.matrix_id);
        }
        by_id[r.matrix_id].push_back(&r);
    }
    std::vector<double> defaults;
    for (const auto& r : rows) {
        if (r.method == "default" &&
            std::find(defaults.begin(), defaults.end(), r.theta) == defaults.end()) {
            defaults.push_back(r.theta);
        }
    }

    std::vector<EvalRow> table;
    for (const auto& g : groups) {
        for (double d : defaults) {
            EvalRow t;
            t.group = g;
            t.default_theta = d;
            for (const auto& id : ids[g]) {
                const EvalMatrixRow *opt = nullptr, *aut = nullptr, *def = nullptr;
                for (const auto* r : by_id[id]) {
                    if (r->method == "opt") opt = r;
                    if (r->method == "auto") aut = r;
                    if (r->method == "default" && r->theta == d) def = r;
                }
                if (!opt || !aut || !def) throw Error("eval: incomplete rows for " + id);
                ++t.count;
                t.nrow_mean += static_cast<double>(opt->nrow);
                t.iter_opt_mean += static_cast<double>(opt->iterations);
                t.time_opt_mean += opt->time_seconds();
                t.iter_default_mean += static_cast<double>(def->iterations);
                t.time_default_mean += def->time_seconds();
                t.iter_auto_mean += static_cast<double>(aut->iterations);
                t.time_auto_mean += aut->time_seconds();
            }
            const double c = static_cast<double>(t.count);
            for (double* f : {&t.nrow_mean, &t.iter_opt_mean, &t.time_opt_mean,
                              &t.iter_default_mean, &t.time_default_mean, &t.iter_auto_mean,
                              &t.time_auto_mean}) {
                *f /= c;
            }
            t.speedup = t.time_default_mean / t.time_auto_mean;
            table.push_back(t);
        }
    }
    return table;
}

std::string eval_table_csv(const std::vector<EvalRow>& table)
{
    std::string out =
        "group,default_theta,count,nrow_mean,iter_opt_mean,time_opt_mean,iter_default_mean,"
        "time_default_mean,iter_auto_mean,time_auto_mean,speedup\n";
    for (const auto& t : table) {
        out += t.group + "," + format_double(t.default_theta) + "," + std::to_string(t.count);
        for (double v : {t.nrow_mean, t.iter_opt_mean, t.time_opt_mean, t.iter_default_mean,
                         t.time_default_mean, t.iter_auto_mean, t.time_auto_mean, t.speedup}) {
            out += "," + format_double(v);
        }
        out += "\n";
    }
    return out;
}

std::string eval_matrices_csv(const std::vector<EvalMatrixRow>& rows)
{
    std::string out =
        "matrix_id,group,nrow,method,theta,iterations,converged,setup_seconds,solve_seconds,"
        "inference_seconds\n";
    for (const auto& r : rows) {
        out += r.matrix_id + "," + r.group + "," + std::to_string(r.nrow) + "," + r.method + "," +
               format_double(r.theta) + "," + std::to_string(r.iterations) + "," +
               (r.converged ? "1" : "0") + "," + format_double(r.setup_seconds) + "," +
               format_double(r.solve_seconds) + "," + format_double(r.inference_seconds) + "\n";
    }
    return out;
}

EvalResult cmd_eval(const fs::path& manifest_path, const fs::path& model_path,
                    const EvalOptions& opt, Logger log)
{
    const DatasetManifest m = load_manifest(manifest_path);
    const fs::path base = base_dir_of(manifest_path);
    m.validate(base);
    const TrainedModel model = load_model(model_path);
    std::vector<const ManifestEntry*> tests;
    for (const auto& e : m.entries) {
        if (e.split != "test") continue;
        if (!e.theta_opt) throw Error("eval: test matrix '" + e.matrix_id + "' is unlabeled");
        tests.push_back(&e);
    }
    if (tests.empty()) throw Error("eval: manifest has no test matrices");

    EvalResult result;
    for (const auto* e : tests) {
        const CsrMatrix a = read_matrix_market(base / e->matrix_path);
        const Vector b(a.n_rows, 1.0);
        const std::uint64_t seed = pmis_seed_for(e->matrix_id);
        const std::string group = group_of(e->spec);

        std::vector<double> infer_times;
        double theta_auto = 0.0;
        for (std::size_t r = 0; r < std::max<std::size_t>(1, opt.repeats); ++r) {
            const auto t0 = Clock::now();
            theta_auto = predict_theta(model, a);
            infer_times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        }
        std::sort(infer_times.begin(), infer_times.end());

        auto add = [&](const std::string& method, double theta) {
            const SolveOutcome o = timed_solve(a, b, theta, seed, opt.solver, opt.repeats);
            EvalMatrixRow row;
            row.matrix_id = e->matrix_id;
            row.group = group;
            row.nrow = a.n_rows;
            row.method = method;
            row.theta = theta;
            row.iterations = o.iterations;
            row.converged = o.converged;
            row.setup_seconds = o.setup_seconds;
            row.solve_seconds = o.solve_seconds;
            if (method == "auto") row.inference_seconds = infer_times[infer_times.size() / 2];
            result.matrices.push_back(row);
            return row;
        };
        const auto ro = add("opt", *e->theta_opt);
        const auto ra = add("auto", theta_auto);
        for (double d : opt.defaults) add("default", d);
        log << "eval " << e->matrix_id << " theta_opt=" << format_double(*e->theta_opt)
            << " (" << ro.iterations << " it) theta_auto=" << format_double(theta_auto) << " ("
            << ra.iterations << " it)\n";
    }
    result.table = eval_table(result.matrices);
    return result;
}

PredictResult cmd_predict(const fs::path& matrix_path, const fs::path& model_path, bool solve,
                          const SolverParams& solver)
{
    const TrainedModel model = load_model(model_path);
    const CsrMatrix a = read_matrix_market(matrix_path);
    PredictResult r;
    const auto t0 = Clock::now();
    r.theta = predict_theta(model, a);
    r.inference_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (solve) {
        const Vector b(a.n_rows, 1.0);
        r.solve = solve_at_theta(a, b, r.theta, pmis_seed_for(matrix_path.stem().string()), solver);
    }
    return r;
}

}  // namespace autoamg
