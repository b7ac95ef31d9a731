#pragma once

#include "copresence/autodiff.hpp"
#include "copresence/errors.hpp"
#include "copresence/image.hpp"
#include "copresence/rng.hpp"
#include "copresence/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace copresence::model {

struct ModelConfig {
    std::size_t categories = 14;  // n
    std::size_t image_size = 64;
    std::size_t patch = 8;
    std::size_t channels = 16;    // c
    std::size_t depth = 2;
    std::size_t heads = 1;
    std::size_t ffn_hidden = 0;   // 0 means h·w
    std::size_t latent = 16;      // M
    std::size_t prior_hidden1 = 64;
    std::size_t prior_hidden2 = 32;
    double dropout = 0.1;
    double token_init_std = 0.02;
    double sigma_floor = 1e-6;
    bool use_tokens = true;       // weather-token feature embedding
    bool use_uncertainty = true;  // prior/posterior latent learning
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t grid() const noexcept { return image_size / patch; }
    /// h·w, the spatial extent of the encoder output.
    [[nodiscard]] std::size_t spatial() const noexcept { return grid() * grid(); }
    [[nodiscard]] std::size_t patch_dim() const noexcept { return patch * patch * 3; }
    [[nodiscard]] std::size_t hidden() const noexcept { return ffn_hidden == 0 ? spatial() : ffn_hidden; }
    /// Rows of the representation fed to the head: one per category with tokens, else one per channel.
    [[nodiscard]] std::size_t representation_rows() const noexcept { return use_tokens ? categories : channels; }

    void validate() const {
        if (categories == 0) throw ConfigError("model: categories must be >= 1");
        if (latent == 0) throw ConfigError("model: latent size must be >= 1");
        if (channels == 0 || depth == 0 || patch == 0) throw ConfigError("model: channels, depth and patch must be >= 1");
        if (image_size % patch != 0) throw ConfigError("model: image_size must be divisible by patch");
        if (heads == 0 || spatial() % heads != 0 || channels % heads != 0) {
            throw ConfigError("model: attention width and channel count must be divisible by heads");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
        if (!(sigma_floor >= 0.0)) throw ConfigError("model: sigma_floor must be >= 0");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"categories", c.categories},
                       {"image_size", c.image_size},
                       {"patch", c.patch},
                       {"channels", c.channels},
                       {"depth", c.depth},
                       {"heads", c.heads},
                       {"ffn_hidden", c.ffn_hidden},
                       {"latent", c.latent},
                       {"prior_hidden1", c.prior_hidden1},
                       {"prior_hidden2", c.prior_hidden2},
                       {"dropout", c.dropout},
                       {"token_init_std", c.token_init_std},
                       {"sigma_floor", c.sigma_floor},
                       {"use_tokens", c.use_tokens},
                       {"use_uncertainty", c.use_uncertainty},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("model config must be an object");
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "categories") c.categories = v.get<std::size_t>();
        else if (key == "image_size") c.image_size = v.get<std::size_t>();
        else if (key == "patch") c.patch = v.get<std::size_t>();
        else if (key == "channels") c.channels = v.get<std::size_t>();
        else if (key == "depth") c.depth = v.get<std::size_t>();
        else if (key == "heads") c.heads = v.get<std::size_t>();
        else if (key == "ffn_hidden") c.ffn_hidden = v.get<std::size_t>();
        else if (key == "latent") c.latent = v.get<std::size_t>();
        else if (key == "prior_hidden1") c.prior_hidden1 = v.get<std::size_t>();
        else if (key == "prior_hidden2") c.prior_hidden2 = v.get<std::size_t>();
        else if (key == "dropout") c.dropout = v.get<double>();
        else if (key == "token_init_std") c.token_init_std = v.get<double>();
        else if (key == "sigma_floor") c.sigma_floor = v.get<double>();
        else if (key == "use_tokens") c.use_tokens = v.get<bool>();
        else if (key == "use_uncertainty") c.use_uncertainty = v.get<bool>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else throw ConfigError("unknown model config key '" + key + "'");
    }
}

/// Axis-aligned Gaussian read back from a tape.
struct LatentGaussian {
    std::vector<double> mu;
    std::vector<double> sigma;
};

/// Mean of σ over the latent dimensions.
[[nodiscard]] inline double uncertainty_score(const std::vector<double>& sigma) {
    if (sigma.empty()) {
        throw DomainError("uncertainty_score: empty sigma");
    }
    double acc = 0.0;
    for (double s : sigma) {
        acc += s;
    }
    return acc / static_cast<double>(sigma.size());
}

[[nodiscard]] inline double uncertainty_score(const LatentGaussian& g) { return uncertainty_score(g.sigma); }

/// Gaussian whose mean and σ live on a tape (1×M each).
struct GaussianVars {
    Var mu;
    Var sigma;

    [[nodiscard]] LatentGaussian read() const {
        return {mu.value().storage(), sigma.value().storage()};
    }
};

/// Output of the token encoder.
struct TokenBlock {
    Var x;           // h·w × c scene features
    Var stacked;     // H after the last layer: (c [+ n]) × h·w
    Var weather;     // representation rows fed to the head: n × h·w with tokens, c × h·w without
    std::vector<Var> attention;  // per layer, head 0
};

enum class LatentMode { stochastic, mean };

/// Per-call switches. `rng` feeds dropout and stochastic latents; it is required when either is active.
struct ForwardOptions {
    bool training = false;
    LatentMode latent_mode = LatentMode::mean;
    Rng* rng = nullptr;
};

struct TrainForward {
    Var prediction;  // n×1
    std::optional<GaussianVars> prior;
    std::optional<GaussianVars> posterior;
    TokenBlock tokens;
};

struct Inference {
    std::vector<double> prediction;
    std::optional<LatentGaussian> prior;
    double uncertainty = 0.0;
    std::vector<double> category_uncertainty;
};

/// Fixed sinusoidal position signal, one row per patch.
[[nodiscard]] inline Tensor position_signal(std::size_t positions, std::size_t channels) {
    Tensor pos(positions, channels);
    for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t i = 0; i < channels; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(channels));
            const double angle = static_cast<double>(p) * rate;
            pos(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pos;
}

/// Non-overlapping patches as rows, features ordered (dy, dx, channel), pixels mapped from [0, 1] to [-1, 1].
[[nodiscard]] inline Tensor extract_patches(const Image& img, std::size_t patch) {
    if (patch == 0 || img.height % patch != 0 || img.width % patch != 0) {
        throw ShapeError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                         " is not divisible into " + std::to_string(patch) + "-pixel patches");
    }
    const std::size_t gh = img.height / patch, gw = img.width / patch;
    Tensor out(gh * gw, patch * patch * 3);
    for (std::size_t py = 0; py < gh; ++py) {
        for (std::size_t px = 0; px < gw; ++px) {
            std::size_t f = 0;
            for (std::size_t dy = 0; dy < patch; ++dy) {
                for (std::size_t dx = 0; dx < patch; ++dx) {
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        out(py * gw + px, f++) = 2.0 * img.at(py * patch + dy, px * patch + dx, ch) - 1.0;
                    }
                }
            }
        }
    }
    return out;
}

/// Binds parameters to a tape once per forward pass. Const models bind them as constants.
class ParamBinder {
  public:
    ParamBinder(Tape& tape, ParameterSet* mutable_params, const ParameterSet& params)
        : tape_(tape), mutable_(mutable_params), params_(params) {}

    Var operator()(const std::string& name) {
        if (auto it = cache_.find(name); it != cache_.end()) {
            return it->second;
        }
        Var v = mutable_ != nullptr ? tape_.param(mutable_->at(name)) : tape_.constant_ref(params_.at(name).value);
        cache_.emplace(name, v);
        return v;
    }

    [[nodiscard]] Tape& tape() noexcept { return tape_; }

  private:
    Tape& tape_;
    ParameterSet* mutable_;
    const ParameterSet& params_;
    std::map<std::string, Var> cache_;
};

/// Token-augmented patch encoder with prior/posterior latent nets and a sigmoid head.
class MeFormer {
  public:
    explicit MeFormer(ModelConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        init_parameters();
    }

    MeFormer(ModelConfig cfg, ParameterSet params) : cfg_(cfg), params_(std::move(params)) {
        cfg_.validate();
        check_layout();
    }

    [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] ParameterSet& params() noexcept { return params_; }
    [[nodiscard]] const ParameterSet& params() const noexcept { return params_; }

    /// Parameters that take part in the forward pass under the current module switches.
    [[nodiscard]] std::vector<std::string> active_parameter_names() const {
        std::vector<std::string> names;
        for (const auto& p : params_) {
            const bool token = p.name == "tokens";
            const bool latent = p.name.starts_with("prior.") || p.name.starts_with("posterior.") ||
                                p.name == "head.W4" || p.name == "head.b4";
            if ((token && !cfg_.use_tokens) || (latent && !cfg_.use_uncertainty)) {
                continue;
            }
            names.push_back(p.name);
        }
        return names;
    }

    // -----------------------------------------------------------------------------------------
    // Building blocks
    // -----------------------------------------------------------------------------------------

    /// Patches projected to c channels plus the position signal: (h·w) × c.
    Var embed_patches(ParamBinder& bind, const Image& img) const {
        if (img.height != cfg_.image_size || img.width != cfg_.image_size) {
            throw ShapeError("model expects " + std::to_string(cfg_.image_size) + "x" + std::to_string(cfg_.image_size) +
                             " input, got " + std::to_string(img.height) + "x" + std::to_string(img.width));
        }
        Tape& t = bind.tape();
        Var patches = t.constant(extract_patches(img, cfg_.patch));
        Var x = add_row_bias(matmul(patches, bind("embed.W")), bind("embed.b"));
        return add_const(x, position_signal(cfg_.spatial(), cfg_.channels));
    }

    struct LayerOutput {
        Var output;
        Var attention;  // head 0
    };

    /// Self-attention over the rows of H followed by the two-layer ReLU feed-forward.
    ///
    /// a_lm = softmax_m((h_l·W_Q)·(h_m·W_K) / √c); h̄_l = Σ_m a_lm h_m·W_V; h'_l = ReLU(h̄_l·W_1 + b_1)·W_2 + b_2.
    LayerOutput encoder_layer(ParamBinder& bind, const Var& stacked, std::size_t layer,
                              const ForwardOptions& opt) const {
        const std::string p = "layer" + std::to_string(layer) + ".";
        if (stacked.shape().cols != cfg_.spatial()) {
            throw ShapeError("encoder layer expects rows of width " + std::to_string(cfg_.spatial()) + ", got " +
                             to_string(stacked.shape()));
        }
        Var q = matmul(stacked, bind(p + "Wq"));
        Var k = matmul(stacked, bind(p + "Wk"));
        Var v = matmul(stacked, bind(p + "Wv"));
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.channels));
        Var mixed;
        Var first_attention;
        const std::size_t width = cfg_.spatial() / cfg_.heads;
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            Var qh = cfg_.heads == 1 ? q : slice_cols(q, h * width, (h + 1) * width);
            Var kh = cfg_.heads == 1 ? k : slice_cols(k, h * width, (h + 1) * width);
            Var vh = cfg_.heads == 1 ? v : slice_cols(v, h * width, (h + 1) * width);
            Var attn = softmax(scale(matmul_nt(qh, kh), inv_scale), 1);
            Var out = matmul(attn, vh);
            if (h == 0) {
                first_attention = attn;
                mixed = out;
            } else {
                mixed = concat_cols(mixed, out);
            }
        }
        Var hidden = relu(add_row_bias(matmul(mixed, bind(p + "W1")), bind(p + "b1")));
        if (opt.training && cfg_.dropout > 0.0) {
            hidden = mul_const(hidden, dropout_mask(hidden.shape(), opt));
        }
        Var out = add_row_bias(matmul(hidden, bind(p + "W2")), bind(p + "b2"));
        return {out, first_attention};
    }

    /// Stacks the transposed scene features with the weather tokens and runs the encoder layers.
    TokenBlock encode_with_tokens(ParamBinder& bind, const Var& x, const ForwardOptions& opt) const {
        if (x.shape() != Shape{cfg_.spatial(), cfg_.channels}) {
            throw ShapeError("encode_with_tokens expects x of shape " +
                             to_string(Shape{cfg_.spatial(), cfg_.channels}) + ", got " + to_string(x.shape()));
        }
        TokenBlock block;
        block.x = x;
        Var stacked = transpose(x);
        if (cfg_.use_tokens) {
            stacked = concat_rows(stacked, bind("tokens"));
        }
        for (std::size_t l = 0; l < cfg_.depth; ++l) {
            auto out = encoder_layer(bind, stacked, l, opt);
            stacked = out.output;
            block.attention.push_back(out.attention);
        }
        block.stacked = stacked;
        block.weather = cfg_.use_tokens ? slice_rows(stacked, cfg_.channels, cfg_.channels + cfg_.categories) : stacked;
        return block;
    }

    /// Three affine layers (hidden1, hidden2, then M-wide μ and σ heads); the first two use ReLU.
    GaussianVars latent_net(ParamBinder& bind, const std::string& prefix, const Var& input_row) const {
        Var h1 = relu(add_row_bias(matmul(input_row, bind(prefix + "W1")), bind(prefix + "b1")));
        Var h2 = relu(add_row_bias(matmul(h1, bind(prefix + "W2")), bind(prefix + "b2")));
        Var mu = add_row_bias(matmul(h2, bind(prefix + "Wmu")), bind(prefix + "bmu"));
        Var raw = add_row_bias(matmul(h2, bind(prefix + "Wsigma")), bind(prefix + "bsigma"));
        Var sigma = add_scalar(softplus(raw), cfg_.sigma_floor);
        return {mu, sigma};
    }

    GaussianVars prior_net(ParamBinder& bind, const Var& weather) const {
        check_weather_shape(weather);
        return latent_net(bind, "prior.", reshape(weather, Shape{1, weather.shape().numel()}));
    }

    /// Posterior input: ground truth p_i added to every spatial entry of weather row i.
    /// Without tokens the rows are channels, so the ground truth is appended to the flattened features.
    GaussianVars posterior_net(ParamBinder& bind, const Var& weather, const std::vector<double>& truth) const {
        check_weather_shape(weather);
        if (truth.size() != cfg_.categories) {
            throw ShapeError("posterior_net: ground truth has " + std::to_string(truth.size()) + " entries, expected " +
                             std::to_string(cfg_.categories));
        }
        Tape& t = bind.tape();
        if (cfg_.use_tokens) {
            Var injected = add_col_bias(weather, t.constant(Tensor::column(truth)));
            return latent_net(bind, "posterior.", reshape(injected, Shape{1, injected.shape().numel()}));
        }
        Var flat = reshape(weather, Shape{1, weather.shape().numel()});
        return latent_net(bind, "posterior.", concat_cols(flat, t.constant(Tensor::row(truth))));
    }

    /// μ + σ⊙ε with ε ~ N(0, I) drawn from `rng` (stochastic), or μ (mean).
    static Var sample_latent(Tape& tape, const GaussianVars& g, LatentMode mode, Rng* rng) {
        if (mode == LatentMode::mean) {
            return g.mu;
        }
        if (rng == nullptr) {
            throw Error("sample_latent: stochastic mode needs a random stream");
        }
        Tensor eps(g.sigma.shape());
        for (double& e : eps.storage()) {
            e = rng->normal();
        }
        (void)tape;
        return add(g.mu, mul_const(g.sigma, eps));
    }

    /// Sigmoid(GAP(c_prior + c)) with c = W₃X + b₃ and c_prior = W₄z + b₄ broadcast over h·w.
    Var predict_head(ParamBinder& bind, const Var& weather, const std::optional<Var>& z) const {
        check_weather_shape(weather);
        Var c = add_col_bias(matmul(bind("head.W3"), weather), bind("head.b3"));
        if (z.has_value()) {
            if (z->shape() != Shape{1, cfg_.latent}) {
                throw ShapeError("predict_head: latent sample must be " + to_string(Shape{1, cfg_.latent}) + ", got " +
                                 to_string(z->shape()));
            }
            Var c_prior = add(matmul_nt(bind("head.W4"), *z), bind("head.b4"));
            c = add_col_bias(c, c_prior);
        }
        return sigmoid(gap(c));
    }

    // -----------------------------------------------------------------------------------------
    // Pipelines
    // -----------------------------------------------------------------------------------------

    /// Training pass: both latent nets run; the head consumes a prior sample.
    TrainForward forward_train(Tape& tape, const Image& img, const std::vector<double>& truth,
                               const ForwardOptions& opt) {
        ParamBinder bind(tape, &params_, params_);
        return run(bind, img, &truth, opt);
    }

    /// Same pass with parameters bound as constants (no gradient).
    TrainForward forward_train_const(Tape& tape, const Image& img, const std::vector<double>& truth,
                                     const ForwardOptions& opt) const {
        ParamBinder bind(tape, nullptr, params_);
        return run(bind, img, &truth, opt);
    }

    /// Inference without the posterior. Mean mode uses z = μ_prior and is deterministic.
    Inference forward_infer(const Image& img, LatentMode mode = LatentMode::mean, Rng* rng = nullptr,
                            bool category_scores = true) const {
        Tape tape;
        ParamBinder bind(tape, nullptr, params_);
        ForwardOptions opt;
        opt.latent_mode = mode;
        opt.rng = rng;
        TrainForward f = run(bind, img, nullptr, opt);
        Inference out;
        out.prediction = f.prediction.value().storage();
        if (f.prior.has_value()) {
            out.prior = f.prior->read();
            out.uncertainty = uncertainty_score(*out.prior);
            if (category_scores) {
                out.category_uncertainty = category_uncertainty(bind, f.tokens.weather, out.uncertainty);
            }
        }
        return out;
    }

  private:
    TrainForward run(ParamBinder& bind, const Image& img, const std::vector<double>* truth,
                     const ForwardOptions& opt) const {
        TrainForward out;
        Var x = embed_patches(bind, img);
        out.tokens = encode_with_tokens(bind, x, opt);
        std::optional<Var> z;
        if (cfg_.use_uncertainty) {
            out.prior = prior_net(bind, out.tokens.weather);
            if (truth != nullptr) {
                out.posterior = posterior_net(bind, out.tokens.weather, *truth);
            }
            const LatentMode mode = opt.training ? LatentMode::stochastic : opt.latent_mode;
            z = sample_latent(bind.tape(), *out.prior, mode, opt.rng);
        }
        out.prediction = predict_head(bind, out.tokens.weather, z);
        return out;
    }

    /// Per-category read-out: the prior net applied to the weather rows with all other rows zeroed.
    std::vector<double> category_uncertainty(ParamBinder& bind, const Var& weather, double overall) const {
        if (!cfg_.use_tokens) {
            return std::vector<double>(cfg_.categories, overall);
        }
        std::vector<double> scores;
        const Tensor w = weather.value();
        for (std::size_t i = 0; i < cfg_.categories; ++i) {
            Tensor masked(w.shape());
            for (std::size_t j = 0; j < w.cols(); ++j) {
                masked(i, j) = w(i, j);
            }
            auto g = prior_net(bind, bind.tape().constant(std::move(masked)));
            scores.push_back(uncertainty_score(g.sigma.value().storage()));
        }
        return scores;
    }

    void check_weather_shape(const Var& weather) const {
        const Shape expected{cfg_.representation_rows(), cfg_.spatial()};
        if (weather.shape() != expected) {
            throw ShapeError("weather representation must be " + to_string(expected) + ", got " +
                             to_string(weather.shape()));
        }
    }

    Tensor dropout_mask(const Shape& shape, const ForwardOptions& opt) const {
        if (opt.rng == nullptr) {
            throw Error("dropout needs a random stream in training mode");
        }
        Tensor mask(shape);
        const double keep = 1.0 - cfg_.dropout;
        for (double& m : mask.storage()) {
            m = opt.rng->uniform() < keep ? 1.0 / keep : 0.0;
        }
        return mask;
    }

    /// name → shape for the configuration, in checkpoint order.
    [[nodiscard]] std::vector<std::pair<std::string, Shape>> layout() const {
        const std::size_t n = cfg_.categories, c = cfg_.channels, hw = cfg_.spatial(), f = cfg_.hidden();
        const std::size_t rows = cfg_.representation_rows();
        const std::size_t prior_in = rows * hw;
        const std::size_t post_in = cfg_.use_tokens ? prior_in : prior_in + n;
        std::vector<std::pair<std::string, Shape>> out = {
            {"embed.W", {cfg_.patch_dim(), c}},
            {"embed.b", {1, c}},
            {"tokens", {n, hw}},
        };
        for (std::size_t l = 0; l < cfg_.depth; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            out.push_back({p + "Wq", {hw, hw}});
            out.push_back({p + "Wk", {hw, hw}});
            out.push_back({p + "Wv", {hw, hw}});
            out.push_back({p + "W1", {hw, f}});
            out.push_back({p + "b1", {1, f}});
            out.push_back({p + "W2", {f, hw}});
            out.push_back({p + "b2", {1, hw}});
        }
        for (const auto& [prefix, in] : {std::pair{std::string("prior."), prior_in}, {std::string("posterior."), post_in}}) {
            out.push_back({prefix + "W1", {in, cfg_.prior_hidden1}});
            out.push_back({prefix + "b1", {1, cfg_.prior_hidden1}});
            out.push_back({prefix + "W2", {cfg_.prior_hidden1, cfg_.prior_hidden2}});
            out.push_back({prefix + "b2", {1, cfg_.prior_hidden2}});
            out.push_back({prefix + "Wmu", {cfg_.prior_hidden2, cfg_.latent}});
            out.push_back({prefix + "bmu", {1, cfg_.latent}});
            out.push_back({prefix + "Wsigma", {cfg_.prior_hidden2, cfg_.latent}});
            out.push_back({prefix + "bsigma", {1, cfg_.latent}});
        }
        out.push_back({"head.W3", {n, rows}});
        out.push_back({"head.b3", {n, 1}});
        out.push_back({"head.W4", {n, cfg_.latent}});
        out.push_back({"head.b4", {n, 1}});
        return out;
    }

    void init_parameters() {
        Rng rng(stream_seed(cfg_.seed, 0x4d4f44454cULL));
        for (const auto& [name, shape] : layout()) {
            Tensor t(shape);
            const bool is_bias = name.find(".b") != std::string::npos;
            if (name == "tokens") {
                for (double& v : t.storage()) v = rng.normal(0.0, cfg_.token_init_std);
            } else if (!is_bias) {
                const double stddev = 1.0 / std::sqrt(static_cast<double>(shape.rows));
                for (double& v : t.storage()) v = rng.normal(0.0, stddev);
            }
            params_.add(name, std::move(t));
        }
        // W3 maps representation rows onto categories; start it on the smaller scale of the other heads.
        for (double& v : params_.at("head.W3").value.storage()) v *= 0.5;
    }

    void check_layout() const {
        const auto expected = layout();
        if (expected.size() != params_.size()) {
            throw CompatibilityError("parameter count does not match model config");
        }
        std::size_t i = 0;
        for (const auto& p : params_) {
            if (p.name != expected[i].first || p.value.shape() != expected[i].second) {
                throw CompatibilityError("parameter '" + p.name + "' does not match model config layout (expected '" +
                                         expected[i].first + "' " + to_string(expected[i].second) + ")");
            }
            ++i;
        }
    }

    ModelConfig cfg_;
    ParameterSet params_;
};

}  // namespace copresence::model
