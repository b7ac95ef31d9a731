#pragma once

#include "copresence/autodiff.hpp"
#include "copresence/dataset.hpp"
#include "copresence/errors.hpp"
#include "copresence/meformer.hpp"
#include "copresence/objectives.hpp"
#include "copresence/rng.hpp"
#include "copresence/version.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace copresence::train {

using objectives::LossKind;

enum class Target { probability, binary };

[[nodiscard]] inline std::string to_string(Target t) { return t == Target::probability ? "probability" : "binary"; }

[[nodiscard]] inline Target target_from_string(const std::string& s) {
    if (s == "probability") return Target::probability;
    if (s == "binary") return Target::binary;
    throw ConfigError("unknown target '" + s + "' (expected probability or binary)");
}

struct TrainConfig {
    double learning_rate = 2e-4;
    double weight_decay = 1e-4;
    double dropout = 0.1;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double lambda = 1e-5;
    std::size_t latent = 16;
    LossKind loss = LossKind::l2;
    Target target = Target::probability;
    std::uint64_t seed = 0;
    bool disable_mfe = false;
    bool disable_pul = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Encoder shape.
    std::size_t patch = 8;
    std::size_t channels = 16;
    std::size_t depth = 2;
    std::size_t heads = 1;
    std::size_t ffn_hidden = 0;
    /// Every k-th training sample is held out for model selection.
    std::size_t validation_stride = 10;
    /// Upper bound on training-split samples used (0 = all).
    std::size_t max_samples = 0;

    void validate() const {
        if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0) || !(lambda >= 0.0) || !(adam_eps > 0.0)) {
            throw ConfigError("train: learning_rate, weight_decay and lambda must be >= 0, adam_eps > 0");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("train: Adam betas must lie in [0, 1)");
        }
        if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
        if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
        if (latent == 0) throw ConfigError("train: latent must be >= 1");
        if (validation_stride < 2) throw ConfigError("train: validation_stride must be >= 2");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate},
                       {"weight_decay", c.weight_decay},
                       {"dropout", c.dropout},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lambda", c.lambda},
                       {"latent", c.latent},
                       {"loss", objectives::to_string(c.loss)},
                       {"target", to_string(c.target)},
                       {"seed", c.seed},
                       {"disable_mfe", c.disable_mfe},
                       {"disable_pul", c.disable_pul},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"patch", c.patch},
                       {"channels", c.channels},
                       {"depth", c.depth},
                       {"heads", c.heads},
                       {"ffn_hidden", c.ffn_hidden},
                       {"validation_stride", c.validation_stride},
                       {"max_samples", c.max_samples}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("train config must be an object");
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "learning_rate") c.learning_rate = v.get<double>();
        else if (key == "weight_decay") c.weight_decay = v.get<double>();
        else if (key == "dropout") c.dropout = v.get<double>();
        else if (key == "epochs") c.epochs = v.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "lambda") c.lambda = v.get<double>();
        else if (key == "latent") c.latent = v.get<std::size_t>();
        else if (key == "loss") c.loss = objectives::loss_kind_from_string(v.get<std::string>());
        else if (key == "target") c.target = target_from_string(v.get<std::string>());
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "disable_mfe") c.disable_mfe = v.get<bool>();
        else if (key == "disable_pul") c.disable_pul = v.get<bool>();
        else if (key == "beta1") c.beta1 = v.get<double>();
        else if (key == "beta2") c.beta2 = v.get<double>();
        else if (key == "adam_eps") c.adam_eps = v.get<double>();
        else if (key == "patch") c.patch = v.get<std::size_t>();
        else if (key == "channels") c.channels = v.get<std::size_t>();
        else if (key == "depth") c.depth = v.get<std::size_t>();
        else if (key == "heads") c.heads = v.get<std::size_t>();
        else if (key == "ffn_hidden") c.ffn_hidden = v.get<std::size_t>();
        else if (key == "validation_stride") c.validation_stride = v.get<std::size_t>();
        else if (key == "max_samples") c.max_samples = v.get<std::size_t>();
        else throw ConfigError("unknown train config key '" + key + "'");
    }
}

/// FNV-1a over the canonical JSON dump of the config.
[[nodiscard]] inline std::string config_hash(const TrainConfig& c) {
    const std::string text = nlohmann::json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

[[nodiscard]] inline model::ModelConfig model_config(const TrainConfig& t, std::size_t categories,
                                                    std::size_t image_size) {
    model::ModelConfig m;
    m.categories = categories;
    m.image_size = image_size;
    m.patch = t.patch;
    m.channels = t.channels;
    m.depth = t.depth;
    m.heads = t.heads;
    m.ffn_hidden = t.ffn_hidden;
    m.latent = t.latent;
    m.dropout = t.dropout;
    m.use_tokens = !t.disable_mfe;
    m.use_uncertainty = !t.disable_pul;
    m.seed = t.seed;
    return m;
}

// ---------------------------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------------------------

struct AdamHyper {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamMoments {
    Tensor m;
    Tensor v;
};

/// One Adam update of `param` at 1-based step `t`. Weight decay p ← p − lr·wd·p precedes the Adam delta.
inline void adam_step(Tensor& param, const Tensor& grad, AdamMoments& state, const AdamHyper& h, std::uint64_t t,
                      const std::string& name = "parameter") {
    if (grad.shape() != param.shape()) {
        throw ShapeError("adam_step: gradient of '" + name + "' has shape " + to_string(grad.shape()) +
                         ", parameter has " + to_string(param.shape()));
    }
    if (t == 0) {
        throw DomainError("adam_step: step counter is 1-based");
    }
    if (state.m.size() == 0) {
        state.m = Tensor(param.shape());
        state.v = Tensor(param.shape());
    }
    for (double g : grad.values()) {
        if (!std::isfinite(g)) {
            throw TrainingError("non-finite gradient in parameter '" + name + "'");
        }
    }
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        param[i] -= h.lr * h.weight_decay * param[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        param[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

/// Adam over the named parameters of a set, keyed by name.
class Adam {
  public:
    explicit Adam(AdamHyper h) : h_(h) {}

    void step(ParameterSet& params, const std::vector<std::string>& names) {
        ++t_;
        for (const auto& name : names) {
            Parameter& p = params.at(name);
            adam_step(p.value, p.grad, moments_[name], h_, t_, name);
        }
    }

    [[nodiscard]] std::uint64_t steps() const noexcept { return t_; }

  private:
    AdamHyper h_;
    std::uint64_t t_ = 0;
    std::map<std::string, AdamMoments> moments_;
};

// ---------------------------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------------------------

struct StratumRow {
    std::string name;
    objectives::MetricSummary metrics;
};

struct Evaluation {
    std::string split;
    objectives::EstimationReport estimation;
    objectives::ClassificationReport classification;
    std::vector<StratumRow> strata;  // 1, 2, 3, 4, >4, All
    std::vector<std::vector<double>> predictions;
    std::vector<double> uncertainty;
    std::vector<std::size_t> copresent;
};

/// Metrics per category and per co-presence stratum over precomputed predictions.
[[nodiscard]] inline Evaluation evaluate_predictions(const std::vector<const data::SceneSample*>& samples,
                                                     std::vector<std::vector<double>> preds,
                                                     std::vector<double> uncertainty, double threshold = 0.5) {
    if (samples.empty()) {
        throw DomainError("evaluate: empty split");
    }
    Evaluation ev;
    std::vector<std::vector<double>> gts;
    std::vector<std::vector<int>> bin_pred, bin_gt;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        gts.push_back(samples[i]->label_prob);
        bin_gt.push_back(samples[i]->label_binary);
        bin_pred.push_back(sim::binarize(preds[i], threshold));
        ev.copresent.push_back(samples[i]->copresent());
    }
    ev.estimation = objectives::estimation_report(preds, gts);
    ev.classification = objectives::classification_suite(bin_pred, bin_gt);
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups[data::stratum_of(ev.copresent[i])].push_back(i);
        all.push_back(i);
    }
    for (const char* name : data::kStrata) {
        ev.strata.push_back({name, objectives::summarize(ev.estimation.samples, groups[name])});
    }
    ev.strata.push_back({"All", objectives::summarize(ev.estimation.samples, all)});
    ev.predictions = std::move(preds);
    ev.uncertainty = std::move(uncertainty);
    return ev;
}

inline Image resized_for(const model::MeFormer& m, const Image& img) {
    const std::size_t s = m.config().image_size;
    return resize_bilinear(img, s, s);
}

[[nodiscard]] inline Evaluation evaluate(const model::MeFormer& m, const std::vector<const data::SceneSample*>& samples,
                                         const std::string& split_name = "test", double threshold = 0.5) {
    if (samples.empty()) {
        throw DomainError("evaluate: split '" + split_name + "' is empty");
    }
    std::vector<std::vector<double>> preds;
    std::vector<double> unc;
    for (const auto* s : samples) {
        auto out = m.forward_infer(resized_for(m, s->image), model::LatentMode::mean, nullptr, false);
        preds.push_back(std::move(out.prediction));
        unc.push_back(out.uncertainty);
    }
    Evaluation ev = evaluate_predictions(samples, std::move(preds), std::move(unc), threshold);
    ev.split = split_name;
    return ev;
}

[[nodiscard]] inline Evaluation evaluate(const model::MeFormer& m, const data::Dataset& ds,
                                         const std::string& split = "test", double threshold = 0.5) {
    if (ds.categories.size() != m.config().categories) {
        throw CompatibilityError("dataset has " + std::to_string(ds.categories.size()) +
                                 " categories, model expects " + std::to_string(m.config().categories));
    }
    return evaluate(m, ds.split(split), split, threshold);
}

// ---------------------------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_regression = 0.0;
    double train_kl = 0.0;
    double val_ssd = 0.0;
    double val_r2 = 0.0;
};

struct RunRecord {
    std::string config_hash;
    TrainConfig config;
    std::uint64_t seed = 0;
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    std::size_t train_samples = 0;
    std::size_t validation_samples = 0;
    std::optional<Evaluation> final_eval;
    double wall_seconds = 0.0;  // kept out of the serialized record so reruns compare byte-identically
};

struct TrainResult {
    model::MeFormer model;
    RunRecord record;
};

using TrainLogger = std::function<void(const nlohmann::json&)>;

struct SplitIndices {
    std::vector<const data::SceneSample*> train;
    std::vector<const data::SceneSample*> validation;
};

/// Deterministic hold-out: every `stride`-th training-split sample (after truncation to `max_samples`).
[[nodiscard]] inline SplitIndices training_split(const data::Dataset& ds, const TrainConfig& cfg) {
    auto train = ds.split("train");
    if (cfg.max_samples > 0 && train.size() > cfg.max_samples) {
        train.resize(cfg.max_samples);
    }
    SplitIndices out;
    for (std::size_t i = 0; i < train.size(); ++i) {
        (i % cfg.validation_stride == cfg.validation_stride - 1 ? out.validation : out.train).push_back(train[i]);
    }
    if (out.train.empty()) {
        throw TrainingError("training split is empty");
    }
    if (out.validation.empty()) {
        out.validation.push_back(out.train.back());
    }
    return out;
}

/// Loss of one sample recorded on `tape`: regression (or BCE) plus λ·KL(posterior‖prior).
struct SampleLoss {
    Var total;
    Var regression;
    std::optional<Var> kl;
};

inline SampleLoss sample_loss(model::MeFormer& m, Tape& tape, const data::SceneSample& s, const TrainConfig& cfg,
                              Rng& rng, bool training = true) {
    model::ForwardOptions opt;
    opt.training = training;
    opt.latent_mode = training ? model::LatentMode::stochastic : model::LatentMode::mean;
    opt.rng = &rng;
    const Image img = resize_bilinear(s.image, m.config().image_size, m.config().image_size);
    auto f = m.forward_train(tape, img, s.label_prob, opt);
    SampleLoss out;
    if (cfg.target == Target::binary) {
        std::vector<double> y(s.label_binary.begin(), s.label_binary.end());
        out.regression = objectives::bce_multilabel(f.prediction, y);
    } else {
        out.regression = objectives::regression_loss(cfg.loss, f.prediction, s.label_prob);
    }
    if (f.prior && f.posterior) {
        out.kl = objectives::kl_gaussians(*f.posterior, *f.prior);
    }
    out.total = objectives::total_loss(out.regression, out.kl, cfg.lambda);
    return out;
}

[[nodiscard]] inline nlohmann::json epoch_json(const EpochLog& e) {
    return {{"epoch", e.epoch},     {"train_loss", e.train_loss}, {"train_regression", e.train_regression},
            {"train_kl", e.train_kl}, {"val_ssd", e.val_ssd},     {"val_r2", e.val_r2}};
}

/// Seeded end-to-end run. The returned model holds the parameters of the best validation epoch.
[[nodiscard]] inline TrainResult train(const TrainConfig& cfg, const data::Dataset& ds, const TrainLogger& log = {}) {
    cfg.validate();
    if (ds.samples.empty()) {
        throw TrainingError("dataset is empty");
    }
    const std::size_t image_size = ds.samples.front().image.height;
    if (image_size == 0) {
        throw TrainingError("dataset images are not loaded");
    }
    const auto t0 = std::chrono::steady_clock::now();
    model::MeFormer m(model_config(cfg, ds.categories.size(), image_size));
    for (const auto& s : ds.samples) {
        if (s.label_prob.size() != ds.categories.size()) {
            throw CompatibilityError("sample '" + s.file + "' has " + std::to_string(s.label_prob.size()) +
                                     " labels, dataset lists " + std::to_string(ds.categories.size()) + " categories");
        }
    }
    const auto split = training_split(ds, cfg);
    const auto active = m.active_parameter_names();
    Adam adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});

    RunRecord rec;
    rec.config = cfg;
    rec.config_hash = config_hash(cfg);
    rec.seed = cfg.seed;
    rec.train_samples = split.train.size();
    rec.validation_samples = split.validation.size();

    ParameterSet best = m.params();
    double best_ssd = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::uint64_t epoch_seed = stream_seed(cfg.seed, 0x45504f4348ULL + epoch);
        Rng shuffle_rng(epoch_seed);
        data::seeded_shuffle(order, shuffle_rng);
        EpochLog e;
        e.epoch = epoch;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            m.params().zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                Rng rng(stream_seed(epoch_seed, order[k]));
                Tape tape;
                auto l = [&] {
                    try {
                        return sample_loss(m, tape, *split.train[order[k]], cfg, rng, true);
                    } catch (const DomainError& err) {
                        throw TrainingError("non-finite activations at epoch " + std::to_string(epoch) + " on '" +
                                            split.train[order[k]]->file + "': " + err.what());
                    }
                }();
                const double total = l.total.item();
                if (!std::isfinite(total)) {
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " on '" +
                                        split.train[order[k]]->file + "'");
                }
                e.train_loss += total;
                e.train_regression += l.regression.item();
                e.train_kl += l.kl ? l.kl->item() : 0.0;
                tape.backward(scale(l.total, inv_batch));
            }
            adam.step(m.params(), active);
        }
        const auto n = static_cast<double>(order.size());
        e.train_loss /= n;
        e.train_regression /= n;
        e.train_kl /= n;
        const auto val = evaluate(m, split.validation, "validation");
        e.val_ssd = val.estimation.overall.ssd;
        e.val_r2 = val.estimation.overall.r2;
        rec.epochs.push_back(e);
        if (e.val_ssd < best_ssd) {
            best_ssd = e.val_ssd;
            best = m.params();
            rec.best_epoch = epoch;
        }
        if (log) {
            auto j = epoch_json(e);
            j["event"] = "epoch";
            log(j);
        }
    }
    model::MeFormer best_model(m.config(), std::move(best));
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(best_model), std::move(rec)};
}

// ---------------------------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------------------------

enum class SweepAxis { latent_size, loss_kind, lambda };

[[nodiscard]] inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::latent_size: return "latent";
        case SweepAxis::loss_kind: return "loss";
        case SweepAxis::lambda: return "lambda";
    }
    return "?";
}

[[nodiscard]] inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "latent" || s == "latent-size") return SweepAxis::latent_size;
    if (s == "loss" || s == "loss-kind") return SweepAxis::loss_kind;
    if (s == "lambda") return SweepAxis::lambda;
    throw ConfigError("unknown ablation axis '" + s + "' (expected latent, loss or lambda)");
}

[[nodiscard]] inline std::vector<std::string> default_sweep_values(SweepAxis a) {
    switch (a) {
        case SweepAxis::latent_size: return {"4", "8", "16", "24", "32"};
        case SweepAxis::loss_kind: return {"l1", "smooth-l1", "l2"};
        case SweepAxis::lambda: return {"1e-3", "1e-4", "1e-5", "1e-6", "1e-7"};
    }
    return {};
}

struct AblationRow {
    std::string value;
    objectives::MetricSummary metrics;
    std::string config_hash;
};

struct AblationTable {
    SweepAxis axis = SweepAxis::latent_size;
    std::vector<AblationRow> rows;
};

[[nodiscard]] inline TrainConfig apply_sweep_value(TrainConfig cfg, SweepAxis axis, const std::string& value) {
    try {
        switch (axis) {
            case SweepAxis::latent_size: {
                std::size_t pos = 0;
                const long v = std::stol(value, &pos);
                if (pos != value.size() || v <= 0) throw ConfigError("latent size must be a positive integer");
                cfg.latent = static_cast<std::size_t>(v);
                break;
            }
            case SweepAxis::loss_kind: cfg.loss = objectives::loss_kind_from_string(value); break;
            case SweepAxis::lambda: {
                std::size_t pos = 0;
                const double v = std::stod(value, &pos);
                if (pos != value.size() || !(v >= 0.0)) throw ConfigError("lambda must be a number >= 0");
                cfg.lambda = v;
                break;
            }
        }
    } catch (const std::logic_error&) {
        throw ConfigError("invalid " + to_string(axis) + " value '" + value + "'");
    }
    return cfg;
}

/// One train + test evaluation per value with the base seed.
[[nodiscard]] inline AblationTable ablation_sweep(SweepAxis axis, const std::vector<std::string>& values,
                                                  const TrainConfig& base, const data::Dataset& ds,
                                                  const TrainLogger& log = {}) {
    if (values.empty()) {
        throw ConfigError("ablation sweep needs at least one value");
    }
    AblationTable table;
    table.axis = axis;
    for (const auto& v : values) {
        const TrainConfig cfg = apply_sweep_value(base, axis, v);
        auto result = train(cfg, ds, log);
        const auto ev = evaluate(result.model, ds, "test");
        table.rows.push_back({v, ev.estimation.overall, result.record.config_hash});
        if (log) {
            log({{"event", "ablation_row"}, {"axis", to_string(axis)}, {"value", v}, {"ssd", ev.estimation.overall.ssd}});
        }
    }
    return table;
}

}  // namespace copresence::train
