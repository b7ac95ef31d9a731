#pragma once

#include "copresence/errors.hpp"
#include "copresence/image.hpp"
#include "copresence/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace copresence::sim {

/// The 14 weather categories, in definition-table order.
inline constexpr std::array<std::string_view, 14> kCategoryNames = {
    "clear", "clearing", "cloudy", "overcast", "rainy",   "light rain", "snow",
    "thunder", "smog", "neutral", "extra sunny", "foggy", "frozen",     "blizzard"};

enum Category : std::size_t {
    kClear = 0,
    kClearing,
    kCloudy,
    kOvercast,
    kRainy,
    kLightRain,
    kSnow,
    kThunder,
    kSmog,
    kNeutral,
    kExtraSunny,
    kFoggy,
    kFrozen,
    kBlizzard,
};

[[nodiscard]] inline std::vector<std::string> category_names(std::size_t n = kCategoryNames.size()) {
    if (n == 0 || n > kCategoryNames.size()) {
        throw ConfigError("category count must be in [1, 14], got " + std::to_string(n));
    }
    return {kCategoryNames.begin(), kCategoryNames.begin() + static_cast<std::ptrdiff_t>(n)};
}

/// Per-category co-presence probabilities, each in [0, 1].
using ProbabilityVector = std::vector<double>;

// ---------------------------------------------------------------------------------------------
// Atmospheric state
// ---------------------------------------------------------------------------------------------

inline constexpr double kMinTemperature = -30.0;
inline constexpr double kMaxTemperature = 50.0;
/// Moisture storage treated as saturation when forming the relative moisture for fog.
inline constexpr double kMoistureCapacity = 40.0;

struct ScenarioState {
    double moisture = 0.0;      // S, >= 0
    double temperature = 15.0;  // T, °C
    double inflow = 0.0;        // M_I
    double outflow = 0.0;       // M_O
    double evaporation = 0.0;   // E
    double precipitation = 0.0; // P
    std::uint64_t step = 0;     // t

    /// dS/dt = M_I + E − M_O − P.
    [[nodiscard]] double net_flux() const noexcept { return inflow + evaporation - outflow - precipitation; }

    /// S relative to saturation, kept inside (0, 1].
    [[nodiscard]] double relative_moisture() const noexcept {
        return std::clamp(moisture / kMoistureCapacity, 1e-3, 1.0);
    }
};

/// Mean-reverting evolution of the flux rates between steps. Defaults hold fluxes fixed.
struct FluxDynamics {
    double reversion = 0.0;
    double volatility = 0.0;
    double temperature_volatility = 0.0;
    double mean_inflow = 0.0;
    double mean_outflow = 0.0;
    double mean_evaporation = 0.0;
    double mean_precipitation = 0.0;
};

/// One explicit step of the moisture conservation balance, then flux evolution.
///
/// S' = max(0, S + dt·(M_I + E − M_O − P)) uses the fluxes in effect at the start of the step.
[[nodiscard]] inline ScenarioState step_moisture(const ScenarioState& state, double dt, const FluxDynamics& dyn,
                                                 Rng& rng) {
    if (!(dt > 0.0)) {
        throw DomainError("step_moisture: dt must be positive");
    }
    for (double f : {state.inflow, state.outflow, state.evaporation, state.precipitation, state.moisture,
                     state.temperature}) {
        if (!std::isfinite(f)) {
            throw DomainError("step_moisture: non-finite flux or state");
        }
    }
    ScenarioState next = state;
    next.moisture = std::max(0.0, state.moisture + dt * state.net_flux());
    next.step = state.step + 1;

    const double noise_scale = dyn.volatility * std::sqrt(dt);
    auto evolve = [&](double value, double mean) {
        double v = value + dyn.reversion * (mean - value) * dt;
        if (noise_scale > 0.0) {
            v += noise_scale * rng.normal();
        }
        return std::max(0.0, v);
    };
    next.inflow = evolve(state.inflow, dyn.mean_inflow);
    next.outflow = evolve(state.outflow, dyn.mean_outflow);
    next.evaporation = evolve(state.evaporation, dyn.mean_evaporation);
    next.precipitation = evolve(state.precipitation, dyn.mean_precipitation);
    if (dyn.temperature_volatility > 0.0) {
        next.temperature += dyn.temperature_volatility * std::sqrt(dt) * rng.normal();
    }
    next.temperature = std::clamp(next.temperature, kMinTemperature, kMaxTemperature);
    return next;
}

inline constexpr double kMagnusAlpha = 17.27;
inline constexpr double kMagnusBeta = 237.7;

/// Dew-point fog density d = αT/(β+T) + ln(S_rel) with Magnus-Tetens constants.
[[nodiscard]] inline double fog_density(double temperature, double relative_moisture) {
    if (!(relative_moisture > 0.0) || relative_moisture > 1.0) {
        throw DomainError("fog_density: relative moisture must lie in (0, 1]");
    }
    if (!(temperature > -kMagnusBeta)) {
        throw DomainError("fog_density: temperature must exceed -beta");
    }
    return kMagnusAlpha * temperature / (kMagnusBeta + temperature) + std::log(relative_moisture);
}

/// Fog density clipped below at zero, as used when rendering.
[[nodiscard]] inline double render_fog_density(double temperature, double relative_moisture) {
    return std::max(0.0, fog_density(temperature, relative_moisture));
}

// ---------------------------------------------------------------------------------------------
// Memberships
// ---------------------------------------------------------------------------------------------

enum class ScenarioVariable { moisture, temperature, fog, precipitation, tendency };

[[nodiscard]] inline std::string_view to_string(ScenarioVariable v) {
    switch (v) {
        case ScenarioVariable::moisture: return "moisture";
        case ScenarioVariable::temperature: return "temperature";
        case ScenarioVariable::fog: return "fog";
        case ScenarioVariable::precipitation: return "precipitation";
        case ScenarioVariable::tendency: return "tendency";
    }
    return "?";
}

[[nodiscard]] inline ScenarioVariable variable_from_string(std::string_view s) {
    for (auto v : {ScenarioVariable::moisture, ScenarioVariable::temperature, ScenarioVariable::fog,
                   ScenarioVariable::precipitation, ScenarioVariable::tendency}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw ConfigError("unknown scenario variable '" + std::string(s) + "'");
}

/// One additive term of a membership logit.
///
/// linear: slope·(v − midpoint). band: slope·(half_width − |v − midpoint|), positive inside the band.
struct MembershipTerm {
    ScenarioVariable variable = ScenarioVariable::moisture;
    bool band = false;
    double midpoint = 0.0;
    double slope = 1.0;
    double half_width = 0.0;
};

struct CategoryMembership {
    std::string category;
    double bias = 0.0;
    std::vector<MembershipTerm> terms;
};

struct MembershipConfig {
    int version = 1;
    /// Moisture storage separating sunny from rainy states.
    double moisture_threshold = 20.0;
    std::vector<CategoryMembership> categories;
};

namespace detail {

inline MembershipTerm linear(ScenarioVariable v, double mid, double slope) { return {v, false, mid, slope, 0.0}; }
inline MembershipTerm band(ScenarioVariable v, double mid, double half_width, double slope) {
    return {v, true, mid, slope, half_width};
}

}  // namespace detail

/// The shipped membership table. Rain depends on moisture alone, so it is 0.5 exactly at the threshold.
[[nodiscard]] inline MembershipConfig default_membership_config() {
    using detail::band;
    using detail::linear;
    using V = ScenarioVariable;
    MembershipConfig cfg;
    const double st = cfg.moisture_threshold;
    cfg.categories = {
        {"clear", 0.0, {linear(V::moisture, st - 6.0, -0.4), linear(V::precipitation, 0.5, -3.0)}},
        {"clearing",
         0.0,
         {linear(V::tendency, -0.5, -2.0), band(V::moisture, st, 8.0, 0.4), linear(V::precipitation, 1.0, -2.0)}},
        {"cloudy", 0.0, {band(V::moisture, st - 3.0, 5.0, 0.6), linear(V::precipitation, 1.5, -2.0)}},
        {"overcast", 0.0, {linear(V::moisture, st + 4.0, 0.4), linear(V::precipitation, 2.5, -1.5)}},
        {"rainy", 0.0, {linear(V::moisture, st, 0.5)}},
        {"light rain", 0.0, {band(V::precipitation, 1.0, 0.6, 4.0), linear(V::temperature, 0.0, 0.3)}},
        {"snow", 0.0, {linear(V::temperature, 0.0, -0.8), linear(V::precipitation, 0.8, 3.0)}},
        {"thunder", 0.0, {linear(V::precipitation, 3.5, 2.5), linear(V::temperature, 18.0, 0.4)}},
        {"smog",
         0.0,
         {linear(V::moisture, 8.0, -0.5), band(V::tendency, 0.0, 0.5, 3.0), linear(V::temperature, 22.0, 0.2)}},
        {"neutral", 0.0, {band(V::moisture, st, 4.0, 1.5)}},
        {"extra sunny", 0.0, {linear(V::moisture, 10.0, -0.6), linear(V::temperature, 25.0, 0.4)}},
        {"foggy",
         0.0,
         {linear(V::moisture, st + 6.0, 0.4), band(V::fog, 0.5, 1.0, 2.0), linear(V::precipitation, 1.0, -2.0)}},
        {"frozen", 0.0, {linear(V::temperature, -5.0, -0.6), linear(V::precipitation, 0.5, -3.0)}},
        {"blizzard", 0.0, {linear(V::temperature, -8.0, -0.5), linear(V::precipitation, 3.0, 2.0)}},
    };
    return cfg;
}

inline void to_json(nlohmann::json& j, const MembershipTerm& t) {
    j = nlohmann::json{{"variable", to_string(t.variable)},
                       {"kind", t.band ? "band" : "linear"},
                       {"midpoint", t.midpoint},
                       {"slope", t.slope}};
    if (t.band) {
        j["half_width"] = t.half_width;
    }
}

inline void from_json(const nlohmann::json& j, MembershipTerm& t) {
    t.variable = variable_from_string(j.at("variable").get<std::string>());
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "band" && kind != "linear") {
        throw ConfigError("membership term kind must be 'linear' or 'band'");
    }
    t.band = kind == "band";
    t.midpoint = j.at("midpoint").get<double>();
    t.slope = j.at("slope").get<double>();
    t.half_width = t.band ? j.at("half_width").get<double>() : 0.0;
}

inline void to_json(nlohmann::json& j, const MembershipConfig& cfg) {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& c : cfg.categories) {
        cats.push_back({{"category", c.category}, {"bias", c.bias}, {"terms", c.terms}});
    }
    j = nlohmann::json{{"version", cfg.version}, {"moisture_threshold", cfg.moisture_threshold}, {"categories", cats}};
}

inline void from_json(const nlohmann::json& j, MembershipConfig& cfg) {
    cfg.version = j.at("version").get<int>();
    if (cfg.version != 1) {
        throw ConfigError("unsupported membership config version " + std::to_string(cfg.version));
    }
    cfg.moisture_threshold = j.at("moisture_threshold").get<double>();
    cfg.categories.clear();
    for (const auto& c : j.at("categories")) {
        CategoryMembership m;
        m.category = c.at("category").get<std::string>();
        m.bias = c.at("bias").get<double>();
        m.terms = c.at("terms").get<std::vector<MembershipTerm>>();
        cfg.categories.push_back(std::move(m));
    }
}

[[nodiscard]] inline double variable_value(const ScenarioState& s, ScenarioVariable v) {
    switch (v) {
        case ScenarioVariable::moisture: return s.moisture;
        case ScenarioVariable::temperature: return s.temperature;
        case ScenarioVariable::fog: return fog_density(s.temperature, s.relative_moisture());
        case ScenarioVariable::precipitation: return s.precipitation;
        case ScenarioVariable::tendency: return s.net_flux();
    }
    return 0.0;
}

[[nodiscard]] inline double logistic(double x) noexcept {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Smooth per-category memberships in [0, 1]; they need not sum to 1.
[[nodiscard]] inline ProbabilityVector state_to_probabilities(const ScenarioState& state, const MembershipConfig& cfg) {
    ProbabilityVector out;
    out.reserve(cfg.categories.size());
    for (const auto& cat : cfg.categories) {
        double logit = cat.bias;
        for (const auto& term : cat.terms) {
            const double v = variable_value(state, term.variable);
            logit += term.band ? term.slope * (term.half_width - std::abs(v - term.midpoint))
                               : term.slope * (v - term.midpoint);
        }
        out.push_back(logistic(logit));
    }
    return out;
}

/// Memberships divided by their maximum, so the dominant category sits at 1.
[[nodiscard]] inline ProbabilityVector normalize_by_max(const ProbabilityVector& m) {
    const double mx = m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
    if (!(mx > 0.0)) {
        return ProbabilityVector(m.size(), 0.0);
    }
    ProbabilityVector out(m.size());
    std::transform(m.begin(), m.end(), out.begin(), [mx](double v) { return v / mx; });
    return out;
}

// ---------------------------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------------------------

/// Blend weights are the probability label, verbatim.
[[nodiscard]] inline ProbabilityVector ground_truth_from_weights(const std::vector<double>& weights) { return weights; }

/// Impact of a weight error σ_a on the squared-error objective: σ_L² = (σ_a²)². Returns σ_L.
[[nodiscard]] inline double label_error_propagation(double sigma_a) {
    if (!(sigma_a >= 0.0 && sigma_a <= 1.0)) {
        throw DomainError("label_error_propagation: sigma_a must lie in [0, 1]");
    }
    return sigma_a * sigma_a;
}

/// out[i] = 1 iff p[i] >= threshold.
[[nodiscard]] inline std::vector<int> binarize(const ProbabilityVector& p, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw DomainError("binarize: threshold must lie in (0, 1)");
    }
    std::vector<int> out(p.size());
    std::transform(p.begin(), p.end(), out.begin(), [threshold](double v) { return v >= threshold ? 1 : 0; });
    return out;
}

// ---------------------------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------------------------

using Rgb = std::array<double, 3>;

namespace detail {

[[nodiscard]] inline double hash01(std::uint64_t seed, std::uint64_t x, std::uint64_t y) noexcept {
    return static_cast<double>(mix64(seed ^ mix64((x << 32) ^ y)) >> 11) * 0x1.0p-53;
}

/// Bilinear value noise on a lattice of `cell` pixels.
[[nodiscard]] inline double value_noise(std::uint64_t seed, double x, double y, double cell) noexcept {
    const double gx = x / cell, gy = y / cell;
    const auto x0 = static_cast<std::uint64_t>(std::floor(gx));
    const auto y0 = static_cast<std::uint64_t>(std::floor(gy));
    const double fx = gx - std::floor(gx), fy = gy - std::floor(gy);
    const double sx = fx * fx * (3.0 - 2.0 * fx), sy = fy * fy * (3.0 - 2.0 * fy);
    const double a = hash01(seed, x0, y0), b = hash01(seed, x0 + 1, y0);
    const double c = hash01(seed, x0, y0 + 1), d = hash01(seed, x0 + 1, y0 + 1);
    return (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy;
}

[[nodiscard]] inline double luminance(const Image& img, std::size_t y, std::size_t x) noexcept {
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

/// Applies `fn(y, x, v, u, pixel)` to every pixel of a copy of `base`, then clips.
template <typename Fn>
[[nodiscard]] Image map_pixels(const Image& base, Fn&& fn) {
    Image out = base;
    const double hden = base.height > 1 ? static_cast<double>(base.height - 1) : 1.0;
    const double wden = base.width > 1 ? static_cast<double>(base.width - 1) : 1.0;
    for (std::size_t y = 0; y < base.height; ++y) {
        for (std::size_t x = 0; x < base.width; ++x) {
            Rgb px{base.at(y, x, 0), base.at(y, x, 1), base.at(y, x, 2)};
            fn(y, x, static_cast<double>(y) / hden, static_cast<double>(x) / wden, px);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                out.at(y, x, ch) = std::clamp(px[ch], 0.0, 1.0);
            }
        }
    }
    return out;
}

inline void mix_into(Rgb& px, const Rgb& target, double t) noexcept {
    for (std::size_t ch = 0; ch < 3; ++ch) {
        px[ch] = px[ch] * (1.0 - t) + target[ch] * t;
    }
}

}  // namespace detail

/// Texture parameters drawn once per sample so every effect layer is a pure function of the base.
struct EffectTexture {
    std::uint64_t seed = 0;
    double phase = 0.0;       // [0, 1)
    double bolt_position = 0.5;
    double fog_strength = 0.75;
};

/// A weather category and the function producing its effect layer from a base image.
struct WeatherEffect {
    std::size_t category = 0;
    std::function<Image(const Image&)> apply;
};

/// Procedural effect layer for one category. Output has the input's extent and lies in [0, 1].
[[nodiscard]] inline Image apply_effect(std::size_t category, const Image& base, const EffectTexture& tex) {
    using detail::hash01;
    using detail::mix_into;
    const std::uint64_t seed = tex.seed ^ mix64(category + 1);
    const double phase = tex.phase * 2.0 * std::numbers::pi;
    const double w = static_cast<double>(base.width);
    switch (category) {
        case kClear:
            return detail::map_pixels(base, [&](auto, auto, double v, double, Rgb& px) {
                for (double& c : px) c = 0.5 + 1.35 * (c - 0.5);
                mix_into(px, {0.2, 0.5, 1.0}, v < 0.45 ? 0.7 : 0.15);
            });
        case kClearing:
            return detail::map_pixels(base, [&](auto, auto, double v, double u, Rgb& px) {
                mix_into(px, {0.55, 0.65, 0.75}, 0.3);
                const double ray = std::max(0.0, std::sin(12.0 * (u + v) + phase));
                for (double& c : px) c += 0.45 * ray * (1.0 - 0.5 * v);
            });
        case kCloudy:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double v, double, Rgb& px) {
                const double cloud = detail::value_noise(seed, static_cast<double>(x), static_cast<double>(y), 6.0);
                mix_into(px, {0.8, 0.8, 0.82}, 0.75 * cloud * (1.0 - v));
                for (double& c : px) c *= 0.85;
            });
        case kOvercast:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double, double, Rgb& px) {
                const double g = detail::luminance(base, y, x) * 0.6 + 0.15;
                mix_into(px, {g, g, g}, 0.8);
            });
        case kRainy:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double, double, Rgb& px) {
                for (double& c : px) c *= 0.6;
                mix_into(px, {0.35, 0.4, 0.5}, 0.4);
                const auto off = static_cast<std::size_t>(tex.phase * 7.0);
                if ((x + 2 * y + off) % 7 == 0 && hash01(seed, x, y) > 0.4) {
                    for (double& c : px) c += 0.35;
                }
            });
        case kLightRain:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double, double, Rgb& px) {
                mix_into(px, {0.45, 0.6, 0.6}, 0.35);
                const auto off = static_cast<std::size_t>(tex.phase * 5.0);
                if ((x + off) % 5 == 0 && hash01(seed, x, y / 4) > 0.5) {
                    for (double& c : px) c += 0.3;
                }
            });
        case kSnow:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double v, double, Rgb& px) {
                mix_into(px, {0.9, 0.92, 1.0}, 0.3 + (v > 0.55 ? 0.3 : 0.0));
                if (hash01(seed, x, y) > 0.93) {
                    px = {1.0, 1.0, 1.0};
                }
            });
        case kThunder: {
            const double bolt = tex.bolt_position * w;
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double v, double, Rgb& px) {
                for (double& c : px) c *= 0.3;
                px[0] += 0.1;
                px[1] += 0.08;
                px[2] += 0.15;
                if (v < 0.6) {
                    const double path = bolt + 3.0 * std::sin(static_cast<double>(y) * 0.7 + phase);
                    if (std::abs(static_cast<double>(x) - path) <= 1.0) {
                        px = {0.95, 0.95, 1.0};
                    }
                }
            });
        }
        case kSmog:
            return detail::map_pixels(base, [&](auto, auto, double, double, Rgb& px) {
                mix_into(px, {0.6, 0.5, 0.3}, 0.55);
            });
        case kNeutral:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double v, double, Rgb& px) {
                const double band = detail::value_noise(seed, static_cast<double>(x) / 4.0, static_cast<double>(y), 3.0);
                mix_into(px, {0.62, 0.55, 0.68}, 0.4 + 0.3 * band * (1.0 - v));
            });
        case kExtraSunny:
            return detail::map_pixels(base, [&](auto, std::size_t x, double v, double u, Rgb& px) {
                (void)x;
                for (double& c : px) c *= 1.3;
                px[0] += 0.15;
                px[1] += 0.1;
                px[2] -= 0.05;
                const double du = u - 0.85, dv = v - 0.12;
                if (du * du + dv * dv < 0.01) {
                    px = {1.0, 0.97, 0.6};
                }
            });
        case kFoggy:
            return detail::map_pixels(base, [&](auto, auto, double v, double, Rgb& px) {
                mix_into(px, {0.85, 0.85, 0.87}, std::clamp(tex.fog_strength * (1.0 - 0.4 * v), 0.0, 1.0));
            });
        case kFrozen:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double v, double, Rgb& px) {
                mix_into(px, {0.7, 0.85, 0.95}, 0.45);
                if (v > 0.55) {
                    mix_into(px, {0.92, 0.96, 1.0}, 0.6);
                    if (hash01(seed, x, y) > 0.9) {
                        px = {0.8, 0.95, 1.0};
                    }
                }
            });
        case kBlizzard:
            return detail::map_pixels(base, [&](std::size_t y, std::size_t x, double, double, Rgb& px) {
                mix_into(px, {0.95, 0.95, 0.97}, 0.75);
                if (hash01(seed, x / 2, y / 2) > 0.85) {
                    px = {1.0, 1.0, 1.0};
                }
            });
        default:
            throw ConfigError("unknown weather category id " + std::to_string(category));
    }
}

[[nodiscard]] inline WeatherEffect make_effect(std::size_t category, const EffectTexture& tex) {
    if (category >= kCategoryNames.size()) {
        throw ConfigError("unknown weather category id " + std::to_string(category));
    }
    return {category, [category, tex](const Image& base) { return apply_effect(category, base, tex); }};
}

/// Σᵢ aᵢ·effectᵢ(base), without the final clip. Exposed so linearity can be checked before clipping.
[[nodiscard]] inline Image blend_unclipped(const Image& base, const std::vector<WeatherEffect>& effects,
                                           const std::vector<double>& weights) {
    if (effects.size() != weights.size()) {
        throw ShapeError("render_blend: " + std::to_string(effects.size()) + " effects but " +
                         std::to_string(weights.size()) + " weights");
    }
    double total = 0.0;
    for (double a : weights) {
        if (!(a >= 0.0)) {
            throw DomainError("render_blend: weights must be non-negative");
        }
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DomainError("render_blend: weights must sum to 1, got " + std::to_string(total));
    }
    Image out(base.height, base.width, 0.0);
    for (std::size_t i = 0; i < effects.size(); ++i) {
        if (weights[i] == 0.0) {
            continue;
        }
        const Image layer = effects[i].apply(base);
        if (!layer.same_extent(base)) {
            throw ShapeError("render_blend: effect changed the image extent");
        }
        for (std::size_t k = 0; k < out.data.size(); ++k) {
            out.data[k] += weights[i] * layer.data[k];
        }
    }
    return out;
}

/// Linear overlay of single-weather effect layers; weights form a convex combination.
[[nodiscard]] inline Image render_blend(const Image& base, const std::vector<WeatherEffect>& effects,
                                        const std::vector<double>& weights) {
    Image out = blend_unclipped(base, effects, weights);
    out.clip();
    return out;
}

/// Procedural outdoor scene: sky gradient, ground, a few buildings, a road. Illumination is fixed.
[[nodiscard]] inline Image render_base_scene(std::size_t height, std::size_t width, Rng& rng) {
    Image img(height, width);
    const double horizon = rng.uniform(0.4, 0.55);
    const Rgb sky_top{rng.uniform(0.45, 0.6), rng.uniform(0.6, 0.75), rng.uniform(0.85, 0.95)};
    const Rgb sky_low{0.78, 0.85, 0.93};
    const Rgb ground{rng.uniform(0.25, 0.45), rng.uniform(0.35, 0.55), rng.uniform(0.2, 0.35)};
    const Rgb road{0.3, 0.3, 0.32};
    struct Building {
        double x0, x1, top;
        Rgb color;
    };
    std::vector<Building> buildings;
    const auto count = 2 + rng.below(3);
    for (std::uint64_t b = 0; b < count; ++b) {
        const double x0 = rng.uniform(0.0, 0.85);
        const double bw = rng.uniform(0.08, 0.25);
        const double gray = rng.uniform(0.3, 0.7);
        buildings.push_back({x0, x0 + bw, horizon - rng.uniform(0.1, 0.3),
                             {gray, gray * rng.uniform(0.9, 1.05), gray * rng.uniform(0.9, 1.1)}});
    }
    const double hden = height > 1 ? static_cast<double>(height - 1) : 1.0;
    const double wden = width > 1 ? static_cast<double>(width - 1) : 1.0;
    for (std::size_t y = 0; y < height; ++y) {
        const double v = static_cast<double>(y) / hden;
        for (std::size_t x = 0; x < width; ++x) {
            const double u = static_cast<double>(x) / wden;
            Rgb px;
            if (v < horizon) {
                const double t = v / horizon;
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    px[ch] = sky_top[ch] * (1.0 - t) + sky_low[ch] * t;
                }
                for (const auto& b : buildings) {
                    if (u >= b.x0 && u <= b.x1 && v >= b.top) {
                        px = b.color;
                    }
                }
            } else if (v > 0.8 && std::abs(u - 0.5) < 0.15 + (v - 0.8)) {
                px = road;
            } else {
                px = ground;
            }
            for (std::size_t ch = 0; ch < 3; ++ch) {
                img.at(y, x, ch) = px[ch];
            }
        }
    }
    return img;
}

}  // namespace copresence::sim
