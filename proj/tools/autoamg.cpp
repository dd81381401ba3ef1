#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "autoamg/format.hpp"
#include "autoamg/matrix_market.hpp"
#include "autoamg/pipeline.hpp"

using namespace autoamg;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out_dir = ".";
};

json read_json(const std::string& path)
{
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw Error(path + ": parse error at byte " + std::to_string(e.byte));
    }
}

void add_solver_options(CLI::App* cmd, SolverParams& s)
{
    cmd->add_option("--tol", s.gmres.tol, "GMRES relative residual tolerance")->capture_default_str();
    cmd->add_option("--max-iter", s.gmres.max_iter, "GMRES iteration cap")->capture_default_str();
    cmd->add_option("--restart", s.gmres.restart, "GMRES restart length")->capture_default_str();
}

void print_solve(const SolveOutcome& o)
{
    std::cout << "iterations=" << o.iterations << " converged=" << (o.converged ? "true" : "false")
              << " setup_seconds=" << format_double(o.setup_seconds)
              << " solve_seconds=" << format_double(o.solve_seconds) << "\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"AMG(theta) with a learned strong threshold"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for training")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads");
    app.add_option("--out-dir", g.out_dir, "Directory for outputs")->capture_default_str();

    std::string gen_config;
    auto* gen = app.add_subcommand("gen", "Generate matrices and a manifest");
    gen->add_option("--config", gen_config, "Dataset config JSON")->required()->check(CLI::ExistingFile);

    std::string manifest;
    GridsearchOptions gs;
    auto* grid = app.add_subcommand("gridsearch", "Label matrices with the grid-optimal theta");
    grid->add_option("--manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    grid->add_flag("--force", gs.force, "Relabel entries that already have labels");
    add_solver_options(grid, gs.solver);

    std::string train_config, model_path, loss_csv;
    std::optional<std::size_t> epochs;
    auto* train_cmd = app.add_subcommand("train", "Train the threshold predictor");
    train_cmd->add_option("--manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--config", train_config, "Training config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--model", model_path, "Output model (default <out-dir>/model.json)");
    train_cmd->add_option("--loss-csv", loss_csv, "Output loss curve (default <out-dir>/train_loss.csv)");
    train_cmd->add_option("--epochs", epochs, "Override the number of epochs");

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Compare theta_auto against theta_opt and defaults");
    eval->add_option("--manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--defaults", ev.defaults, "Default thetas")->delimiter(',')->capture_default_str();
    eval->add_option("--repeats", ev.repeats, "Timing repeats (median)")->capture_default_str();
    add_solver_options(eval, ev.solver);

    std::string matrix_path;
    bool do_solve = false, do_time = false;
    SolverParams predict_solver;
    auto* predict = app.add_subcommand("predict", "Predict theta for one matrix");
    predict->add_option("--matrix", matrix_path, "Matrix Market file")->required()->check(CLI::ExistingFile);
    predict->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    predict->add_flag("--solve", do_solve, "Solve A x = 1 with AMG(theta_auto)-GMRES");
    predict->add_flag("--time", do_time, "Report inference time");
    add_solver_options(predict, predict_solver);

    std::string spec_path, sens_id;
    bool tg = false;
    double delta = 3.0;
    SolverParams sens_solver;
    auto* sens = app.add_subcommand("sensitivity", "Sweep theta over the 0.01 grid");
    auto* sens_matrix = sens->add_option("--matrix", matrix_path, "Matrix Market file")->check(CLI::ExistingFile);
    auto* sens_spec = sens->add_option("--spec", spec_path, "Problem spec JSON")->check(CLI::ExistingFile);
    sens_matrix->excludes(sens_spec);
    sens->add_flag("--tg", tg, "Boundary-matrix experiment with the stationary two-grid solver");
    sens->add_option("--delta", delta, "Multiscale threshold (log10 ratio)")->capture_default_str();
    sens->add_option("--id", sens_id, "Matrix id (seeds PMIS; default: file stem)");
    add_solver_options(sens, sens_solver);

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path out(g.out_dir);
        Logger log{&std::cerr};
        if (*gen) {
            const auto cfg = GenConfig::from_json(read_json(gen_config));
            const auto m = cmd_gen(cfg, out, log);
            std::cout << "wrote " << m.entries.size() << " matrices and " << (out / "manifest.json").string() << "\n";
        } else if (*grid) {
            gs.threads = g.threads;
            const auto m = cmd_gridsearch(manifest, gs, log);
            std::cout << "labeled " << m.entries.size() << " entries in " << manifest << "\n";
        } else if (*train_cmd) {
            TrainConfig cfg;
            if (!train_config.empty()) cfg = train_config_from_json(read_json(train_config));
            cfg.seed = g.seed;
            cfg.threads = g.threads;
            if (epochs) cfg.epochs = *epochs;
            cfg.validate();
            const fs::path mp = model_path.empty() ? out / "model.json" : fs::path(model_path);
            const fs::path lp = loss_csv.empty() ? out / "train_loss.csv" : fs::path(loss_csv);
            cmd_train(manifest, cfg, mp, lp, log);
            std::cout << "wrote " << mp.string() << " and " << lp.string() << "\n";
        } else if (*eval) {
            ev.threads = g.threads;
            const auto r = cmd_eval(manifest, model_path, ev, log);
            const std::string table = eval_table_csv(r.table);
            write_text(out / "eval_table.csv", table);
            write_text(out / "eval_matrices.csv", eval_matrices_csv(r.matrices));
            std::cout << table;
        } else if (*predict) {
            const auto r = cmd_predict(matrix_path, model_path, do_solve, predict_solver);
            std::cout << "theta_auto=" << format_double(r.theta) << "\n";
            if (do_time) std::cout << "inference_seconds=" << format_double(r.inference_seconds) << "\n";
            if (r.solve) print_solve(*r.solve);
        } else if (*sens) {
            if (matrix_path.empty() && spec_path.empty()) throw Error("sensitivity: give --matrix or --spec");
            if (tg) {
                if (spec_path.empty()) throw Error("sensitivity --tg needs a diffusion --spec");
                const auto spec = problem_spec_from_json(read_json(spec_path));
                const auto* d = std::get_if<DiffusionSpec>(&spec);
                if (!d) throw Error("sensitivity --tg needs a diffusion spec");
                const auto e = boundary_sensitivity_experiment(*d, delta, {}, g.threads);
                write_text(out / "boundary.csv", boundary_csv(e));
                write_matrix_market(e.matrix, out / "boundary.mtx");
                std::cout << "theta_star=" << format_double(e.theta_star)
                          << " jump_ratio=" << format_double(e.jump_ratio) << "\n";
            } else {
                CsrMatrix a;
                std::string id = sens_id;
                if (!matrix_path.empty()) {
                    a = read_matrix_market(matrix_path);
                    if (id.empty()) id = fs::path(matrix_path).stem().string();
                } else {
                    a = generate(problem_spec_from_json(read_json(spec_path))).a;
                    if (id.empty()) id = fs::path(spec_path).stem().string();
                }
                const Vector b(a.n_rows, 1.0);
                const auto rec = grid_search(a, b, id, theta_grid(), sens_solver, g.threads);
                const auto ms = multiscale_report(a, delta);
                json summary = summary_json(rec);
                summary["multiscale"] = {{"delta", delta},
                                         {"rows", ms.rows.size()},
                                         {"max_row_ratio_log10", ms.max_row_ratio_log10}};
                write_text(out / "sensitivity.csv", sensitivity_report(rec));
                write_text(out / "sensitivity_summary.json", summary.dump(2) + "\n");
                std::cout << summary.dump() << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
