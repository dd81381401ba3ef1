#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoamg/model.hpp"
#include "autoamg/oracle.hpp"
#include "autoamg/problems.hpp"

namespace autoamg {

namespace fs = std::filesystem;

struct ManifestEntry {
    std::string matrix_id;
    std::string matrix_path;  // relative to the manifest's directory
    nlohmann::json spec;
    std::string split;  // "train" or "test"
    std::optional<double> theta_opt;
    std::optional<std::size_t> iters_at_opt;
    std::string grid_csv;  // relative path, empty until labeled
};

struct DatasetManifest {
    int version = 1;
    std::vector<ManifestEntry> entries;

    /// Unique ids, known split tags, and (given a base directory) existing
    /// matrix files.
    void validate(const std::optional<fs::path>& base_dir = std::nullopt) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const DatasetManifest& m, const fs::path& path);

/// Dataset recipe. Sizes are drawn per matrix from the inclusive ranges
/// using a generator seeded with the matrix index; the index is also the
/// coefficient seed.
struct GenConfig {
    std::size_t count = 40;      // train matrices
    std::size_t test_count = 0;  // test matrices, indexed after the train ones
    std::string problem = "diffusion";  // or "radiation"
    int dim = 3;
    std::size_t nx_lo = 10, nx_hi = 16;
    std::size_t bx_lo = 3, bx_hi = 5;
    int M = 5;
    double omega_er = 1.0;
    double omega_ei = 1.0;
    std::string id_prefix = "m";

    static GenConfig from_json(const nlohmann::json& j);
    void validate() const;
};

ProblemSpec draw_spec(const GenConfig& cfg, std::size_t index);
std::string matrix_id_for(const GenConfig& cfg, std::size_t index);

struct Logger {
    std::ostream* out = nullptr;
    template <typename T>
    Logger& operator<<(const T& v)
    {
        if (out) *out << v;
        return *this;
    }
};

/// Writes out_dir/matrices/<id>.mtx and out_dir/manifest.json.
DatasetManifest cmd_gen(const GenConfig& cfg, const fs::path& out_dir, Logger log = {});

struct GridsearchOptions {
    bool force = false;
    std::size_t threads = 1;
    SolverParams solver;
};

/// Labels unlabeled entries (all entries with `force`), writes per-matrix
/// grid CSVs under grids/ next to the manifest and rewrites the manifest.
DatasetManifest cmd_gridsearch(const fs::path& manifest_path, const GridsearchOptions& opt,
                               Logger log = {});

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Trains on the train split; writes the model JSON and a loss CSV.
TrainedModel cmd_train(const fs::path& manifest_path, const TrainConfig& cfg,
                       const fs::path& model_path, const fs::path& loss_csv_path,
                       Logger log = {});

struct EvalMatrixRow {
    std::string matrix_id;
    std::string group;
    std::size_t nrow = 0;
    std::string method;  // "opt", "auto" or "default"
    double theta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    double inference_seconds = 0.0;  // "auto" rows only
    double time_seconds() const { return setup_seconds + solve_seconds; }
};

struct EvalRow {
    std::string group;
    double default_theta = 0.0;
    std::size_t count = 0;
    double nrow_mean = 0.0;
    double iter_opt_mean = 0.0;
    double time_opt_mean = 0.0;
    double iter_default_mean = 0.0;
    double time_default_mean = 0.0;
    double iter_auto_mean = 0.0;
    double time_auto_mean = 0.0;
    double speedup = 0.0;
};

struct EvalResult {
    std::vector<EvalMatrixRow> matrices;
    std::vector<EvalRow> table;
};

/// Aggregates per-matrix rows into one table row per (group, default).
std::vector<EvalRow> eval_table(const std::vector<EvalMatrixRow>& rows);
std::string eval_table_csv(const std::vector<EvalRow>& table);
std::string eval_matrices_csv(const std::vector<EvalMatrixRow>& rows);

struct EvalOptions {
    std::vector<double> defaults{0.25, 0.5};
    std::size_t repeats = 3;  // timings are medians over this many solves
    std::size_t threads = 1;
    SolverParams solver;
};

/// Solves every test matrix at theta_opt, every default and theta_auto.
EvalResult cmd_eval(const fs::path& manifest_path, const fs::path& model_path,
                    const EvalOptions& opt, Logger log = {});

struct PredictResult {
    double theta = 0.0;
    double inference_seconds = 0.0;
    std::optional<SolveOutcome> solve;
};

PredictResult cmd_predict(const fs::path& matrix_path, const fs::path& model_path,
                          bool solve, const SolverParams& solver = {});

std::string group_of(const nlohmann::json& spec);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace autoamg
