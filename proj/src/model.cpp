#include "autoamg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autoamg/format.hpp"
#include "autoamg/parallel.hpp"
#include "autoamg/rng.hpp"

namespace autoamg {

using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "autoamg-model";
constexpr int kVersion = 1;

double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

NodeFeatureMatrix as_row(std::span<const double> v)
{
    NodeFeatureMatrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data.begin());
    return m;
}

TrainedModel zeros_like(const TrainedModel& m)
{
    TrainedModel z;
    z.gcin = GcinParams::zeros_like(m.gcin);
    z.head = Mlp::zeros_like(m.head);
    return z;
}

void add_into(TrainedModel& acc, TrainedModel& g)
{
    auto a = parameter_blocks(acc);
    auto b = parameter_blocks(g);
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t q = 0; q < a[k].size(); ++q) a[k][q] += b[k][q];
    }
}

struct Adam {
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;

    explicit Adam(TrainedModel& model)
    {
        for (auto s : parameter_blocks(model)) {
            m.emplace_back(s.size(), 0.0);
            v.emplace_back(s.size(), 0.0);
        }
    }

    void step(TrainedModel& model, TrainedModel& grad, const TrainConfig& cfg)
    {
        ++t;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        auto p = parameter_blocks(model);
        auto g = parameter_blocks(grad);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (std::size_t q = 0; q < p[k].size(); ++q) {
                const double gq = g[k][q];
                m[k][q] = cfg.beta1 * m[k][q] + (1.0 - cfg.beta1) * gq;
                v[k][q] = cfg.beta2 * v[k][q] + (1.0 - cfg.beta2) * gq * gq;
                const double mh = m[k][q] / c1;
                const double vh = v[k][q] / c2;
                p[k][q] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
            }
        }
    }
};

double mean_loss(const TrainedModel& m, const std::vector<const LabeledGraph*>& set,
                 std::size_t threads)
{
    std::vector<double> pred(set.size()), target(set.size());
    parallel_for(set.size(), threads, [&](std::size_t i) {
        pred[i] = predict_theta(m, set[i]->graph);
        target[i] = set[i]->target;
    });
    return mse_loss(pred, target);
}

json mlp_to_json(const Mlp& m)
{
    json layers = json::array();
    for (const auto& l : m.layers) {
        layers.push_back({{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}});
    }
    return {{"activation", m.hidden == Activation::Tanh ? "tanh" : "identity"},
            {"layers", layers}};
}

Mlp mlp_from_json(const json& j)
{
    Mlp m;
    const auto act = j.at("activation").get<std::string>();
    if (act == "tanh") {
        m.hidden = Activation::Tanh;
    } else if (act == "identity") {
        m.hidden = Activation::Identity;
    } else {
        throw Error("model: unknown activation '" + act + "'");
    }
    for (const auto& lj : j.at("layers")) {
        Affine l;
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
        l.weight = lj.at("weight").get<std::vector<double>>();
        l.bias = lj.at("bias").get<std::vector<double>>();
        if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
            throw Error("model: parameter shape does not match declared widths");
        }
        if (!m.layers.empty() && m.layers.back().out != l.in) {
            throw Error("model: MLP widths do not chain");
        }
        m.layers.push_back(std::move(l));
    }
    if (m.layers.empty()) throw Error("model: empty MLP");
    return m;
}

}  // namespace

void TrainConfig::validate() const
{
    if (epochs == 0) throw Error("train: epochs must be >= 1");
    if (batch_size == 0) throw Error("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw Error("train: moment coefficients must lie in [0, 1)");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw Error("train: validation_fraction must lie in [0, 1)");
    }
}

TrainedModel TrainedModel::random(const Architecture& arch, std::uint64_t seed)
{
    Rng rng(seed);
    TrainedModel m;
    m.gcin = GcinParams::random(arch.gcin_layers, kNodeFeatureWidth, arch.gcin_hidden,
                                arch.gcin_out, rng);
    const std::size_t dims[] = {arch.gcin_out, arch.head_hidden, 1};
    m.head = Mlp::random(dims, Activation::Tanh, rng);
    m.seed = seed;
    return m;
}

GraphInput extract_graph(const CsrMatrix& a)
{
    return GraphInput{edge_weights(a), init_node_features(a)};
}

double predict_logit(const TrainedModel& m, const GraphInput& g)
{
    const auto xg = gcin_forward(g.w, g.x0, m.gcin, nullptr);
    return mlp_forward(m.head, as_row(xg), nullptr).data.at(0);
}

double squash(double logit) { return kThetaLo + kThetaSpan * sigmoid(logit); }

double predict_theta(const TrainedModel& m, const GraphInput& g)
{
    return squash(predict_logit(m, g));
}

double predict_theta(const TrainedModel& m, const CsrMatrix& a)
{
    if (m.fingerprint != kFeatureFingerprint) {
        throw Error("predict_theta: model fingerprint '" + m.fingerprint +
                    "' does not match feature extractor '" + std::string(kFeatureFingerprint) +
                    "'");
    }
    return predict_theta(m, extract_graph(a));
}

double mse_loss(std::span<const double> pred, std::span<const double> target)
{
    if (pred.size() != target.size()) throw Error("mse_loss: length mismatch");
    if (pred.empty()) throw Error("mse_loss: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = target[i] - pred[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

std::vector<std::span<double>> parameter_blocks(TrainedModel& m)
{
    std::vector<std::span<double>> out;
    auto push = [&](std::span<double> s) { out.push_back(s); };
    for (auto& layer : m.gcin.layers) for_each_block(layer, push);
    for_each_block(m.head, push);
    return out;
}

double loss_and_gradient(const TrainedModel& m, std::span<const LabeledGraph* const> batch,
                         TrainedModel& grad, std::size_t threads)
{
    if (batch.empty()) throw Error("loss_and_gradient: empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<TrainedModel> parts(batch.size());
    std::vector<double> sq(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        const LabeledGraph& s = *batch[i];
        GcinCache gc;
        const auto xg = gcin_forward(s.graph.w, s.graph.x0, m.gcin, &gc);
        MlpCache hc;
        const double z = mlp_forward(m.head, as_row(xg), &hc).data.at(0);
        const double sg = sigmoid(z);
        const double theta = kThetaLo + kThetaSpan * sg;
        const double diff = theta - s.target;
        sq[i] = diff * diff;

        parts[i] = zeros_like(m);
        NodeFeatureMatrix dz(1, 1);
        dz.data[0] = 2.0 * diff * inv * kThetaSpan * sg * (1.0 - sg);
        const auto dxg = mlp_backward(m.head, hc, dz, parts[i].head, true);
        gcin_backward(s.graph.w, m.gcin, gc, dxg.data, parts[i].gcin);
    });
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        loss += sq[i];
        add_into(grad, parts[i]);
    }
    return loss * inv;
}

TrainedModel train(const std::vector<LabeledGraph>& data, const TrainConfig& cfg)
{
    cfg.validate();
    if (data.size() < 2) throw Error("train: need at least 2 labeled matrices");
    for (const auto& s : data) {
        if (!(s.target > 0.0 && s.target < 1.0)) {
            throw Error("train: label of '" + s.id + "' is outside (0, 1)");
        }
    }

    Rng rng(Rng(cfg.seed).next() ^ 0x7261696eULL);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    };
    shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * data.size());
    n_val = std::min(n_val, data.size() - 1);

    std::vector<const LabeledGraph*> train_set, val_set;
    TrainedModel model = TrainedModel::random(cfg.arch, cfg.seed);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const LabeledGraph* s = &data[order[i]];
        if (i < n_val) {
            val_set.push_back(s);
            model.val_ids.push_back(s->id);
        } else {
            train_set.push_back(s);
            model.train_ids.push_back(s->id);
        }
    }

    auto record = [&](std::size_t epoch) {
        EpochLoss e;
        e.epoch = epoch;
        try {
            e.train_loss = mean_loss(model, train_set, cfg.threads);
            if (!val_set.empty()) e.val_loss = mean_loss(model, val_set, cfg.threads);
        } catch (const Error& err) {
            throw Error("train: evaluating epoch " + std::to_string(epoch) + ": " + err.what());
        }
        model.loss_curve.push_back(e);
        return e.val_loss.value_or(e.train_loss);
    };

    Adam adam(model);
    double best = record(0);
    TrainedModel best_model = model;
    std::vector<std::size_t> idx(train_set.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(idx);
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size, ++batch_no) {
            const std::size_t stop = std::min(idx.size(), start + cfg.batch_size);
            std::vector<const LabeledGraph*> batch;
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[idx[i]]);
            TrainedModel grad = zeros_like(model);
            double loss = 0.0;
            try {
                loss = loss_and_gradient(model, batch, grad, cfg.threads);
            } catch (const Error& e) {
                throw Error("train: epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no) + ": " + e.what());
            }
            if (!std::isfinite(loss)) {
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no));
            }
            adam.step(model, grad, cfg);
        }
        const double score = record(epoch);
        if (!std::isfinite(score)) {
            throw Error("train: non-finite loss after epoch " + std::to_string(epoch));
        }
        if (score < best) {
            best = score;
            model.best_epoch = epoch;
            best_model.gcin = model.gcin;
            best_model.head = model.head;
        }
    }
    model.gcin = std::move(best_model.gcin);
    model.head = std::move(best_model.head);
    return model;
}

json to_json(const TrainedModel& m)
{
    json gcin = json::array();
    for (const auto& layer : m.gcin.layers) gcin.push_back(mlp_to_json(layer));
    json curve = json::array();
    for (const auto& e : m.loss_curve) {
        curve.push_back({e.epoch, e.train_loss, e.val_loss ? json(*e.val_loss) : json(nullptr)});
    }
    return {
        {"format", kFormat},
        {"version", kVersion},
        {"fingerprint", m.fingerprint},
        {"gcin", gcin},
        {"head", mlp_to_json(m.head)},
        {"training",
         {{"seed", m.seed},
          {"best_epoch", m.best_epoch},
          {"loss_curve", curve},
          {"train_ids", m.train_ids},
          {"val_ids", m.val_ids}}},
    };
}

TrainedModel model_from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != kFormat) throw Error("model: not a model file");
        if (j.at("version").get<int>() != kVersion) {
            throw Error("model: unsupported version " + j.at("version").dump());
        }
        TrainedModel m;
        m.fingerprint = j.at("fingerprint").get<std::string>();
        for (const auto& lj : j.at("gcin")) m.gcin.layers.push_back(mlp_from_json(lj));
        m.gcin.validate();
        m.head = mlp_from_json(j.at("head"));
        if (m.head.in_width() != m.gcin.out_width() || m.head.out_width() != 1) {
            throw Error("model: head widths do not match the GCIN output");
        }
        if (j.contains("training")) {
            const auto& t = j["training"];
            m.seed = t.value("seed", std::uint64_t{0});
            m.best_epoch = t.value("best_epoch", std::size_t{0});
            for (const auto& e : t.value("loss_curve", json::array())) {
                EpochLoss l;
                l.epoch = e.at(0).get<std::size_t>();
                l.train_loss = e.at(1).get<double>();
                if (!e.at(2).is_null()) l.val_loss = e.at(2).get<double>();
                m.loss_curve.push_back(l);
            }
            m.train_ids = t.value("train_ids", std::vector<std::string>{});
            m.val_ids = t.value("val_ids", std::vector<std::string>{});
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("model: malformed model: ") + e.what());
    }
}

void save_model(const TrainedModel& m, const std::filesystem::path& path)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_model: cannot open " + path.string());
    out << to_json(m).dump() << '\n';
    if (!out) throw Error("save_model: write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path,
                        std::optional<std::string_view> expected_fingerprint)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_model: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw Error("load_model: " + path.string() + ": parse error at byte " +
                    std::to_string(e.byte));
    }
    TrainedModel m = model_from_json(j);
    if (expected_fingerprint && m.fingerprint != *expected_fingerprint) {
        throw Error("load_model: " + path.string() + ": fingerprint '" + m.fingerprint +
                    "' does not match feature extractor '" + std::string(*expected_fingerprint) +
                    "'");
    }
    return m;
}

std::string loss_curve_csv(const TrainedModel& m)
{
    std::string out = "epoch,train_loss,val_loss\n";
    for (const auto& e : m.loss_curve) {
        out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               (e.val_loss ? format_double(*e.val_loss) : std::string()) + "\n";
    }
    return out;
}

}  // namespace autoamg
