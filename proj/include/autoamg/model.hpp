#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autoamg/gnn.hpp"
#include "autoamg/sparse.hpp"

namespace autoamg {

inline constexpr double kThetaLo = 0.01;
inline constexpr double kThetaSpan = 0.98;

struct Architecture {
    std::size_t gcin_layers = 3;
    std::size_t gcin_hidden = 32;
    std::size_t gcin_out = 32;
    std::size_t head_hidden = 32;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    Architecture arch;

    void validate() const;
};

struct EpochLoss {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct TrainedModel {
    GcinParams gcin;
    Mlp head;
    std::string fingerprint{kFeatureFingerprint};
    std::vector<EpochLoss> loss_curve;  // epoch 0 is the untrained model
    std::size_t best_epoch = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;

    static TrainedModel random(const Architecture& arch, std::uint64_t seed);
};

/// Everything the network needs from one matrix.
struct GraphInput {
    EdgeWeighting w;
    NodeFeatureMatrix x0;
};

GraphInput extract_graph(const CsrMatrix& a);

struct LabeledGraph {
    std::string id;
    GraphInput graph;
    double target = 0.0;
};

/// Raw head output before squashing.
double predict_logit(const TrainedModel& m, const GraphInput& g);
double squash(double logit);
double predict_theta(const TrainedModel& m, const GraphInput& g);
/// Throws Error when the model was trained against a different feature recipe.
double predict_theta(const TrainedModel& m, const CsrMatrix& a);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Mean squared error over `batch` and its gradient with respect to every
/// parameter (accumulated into `grad`, which must be zero-initialised).
double loss_and_gradient(const TrainedModel& m, std::span<const LabeledGraph* const> batch,
                         TrainedModel& grad, std::size_t threads = 1);

/// Flattened view of all trainable parameters: GCIN layers, then the head.
std::vector<std::span<double>> parameter_blocks(TrainedModel& m);

/// Mini-batch Adam on the MSE between predicted and target thresholds. The
/// returned parameters are those with the lowest validation loss (training
/// loss when the validation split is empty).
TrainedModel train(const std::vector<LabeledGraph>& data, const TrainConfig& cfg);

nlohmann::json to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const TrainedModel& m, const std::filesystem::path& path);
/// With `expected_fingerprint` set, refuses models built for another
/// feature recipe.
TrainedModel load_model(const std::filesystem::path& path,
                        std::optional<std::string_view> expected_fingerprint = kFeatureFingerprint);

/// epoch,train_loss,val_loss
std::string loss_curve_csv(const TrainedModel& m);

}  // namespace autoamg
