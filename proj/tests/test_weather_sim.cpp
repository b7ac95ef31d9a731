#include "copresence/weather_sim.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

using namespace copresence;
using namespace copresence::sim;

namespace {

ScenarioState state_with(double s, double mi, double e, double mo, double p) {
    ScenarioState st;
    st.moisture = s;
    st.inflow = mi;
    st.evaporation = e;
    st.outflow = mo;
    st.precipitation = p;
    return st;
}

std::size_t index_of(const std::string& name) {
    const auto names = category_names();
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

WeatherEffect constant_tint(double value) {
    return {0, [value](const Image& base) { return Image(base.height, base.width, value); }};
}

std::vector<WeatherEffect> all_effects(std::uint64_t seed) {
    EffectTexture tex;
    tex.seed = seed;
    tex.phase = 0.37;
    tex.bolt_position = 0.4;
    std::vector<WeatherEffect> out;
    for (std::size_t c = 0; c < kCategoryNames.size(); ++c) out.push_back(make_effect(c, tex));
    return out;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n, std::size_t nonzero) {
    std::vector<double> w(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < nonzero; ++i) {
        w[rng.below(n)] += rng.uniform(0.1, 1.0);
    }
    for (double v : w) total += v;
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

TEST(StepMoisture, DirectArithmetic) {
    Rng rng(1);
    const auto next = step_moisture(state_with(10, 2, 1, 0.5, 1.5), 1.0, {}, rng);
    EXPECT_EQ(next.moisture, 11.0);
    EXPECT_EQ(next.step, 1U);
}

TEST(StepMoisture, EquilibriumWithZeroFluxes) {
    Rng rng(1);
    EXPECT_EQ(step_moisture(state_with(7.25, 0, 0, 0, 0), 1.0, {}, rng).moisture, 7.25);
}

TEST(StepMoisture, ClampsAtZero) {
    Rng rng(1);
    EXPECT_EQ(step_moisture(state_with(0.2, 0, 0, 1, 0), 1.0, {}, rng).moisture, 0.0);
}

TEST(StepMoisture, RejectsBadInput) {
    Rng rng(1);
    EXPECT_THROW((void)step_moisture(state_with(1, 0, 0, 0, 0), 0.0, {}, rng), DomainError);
    EXPECT_THROW((void)step_moisture(state_with(1, std::nan(""), 0, 0, 0), 1.0, {}, rng), DomainError);
}

TEST(StepMoisture, ConstantFluxesMatchClosedForm) {
    Rng rng(1);
    for (double dt : {0.25, 0.5, 1.0}) {
        auto s = state_with(3.0, 1.5, 0.75, 0.5, 0.25);
        const double net = s.net_flux();
        for (int k = 1; k <= 40; ++k) {
            s = step_moisture(s, dt, {}, rng);
            EXPECT_NEAR(s.moisture, 3.0 + k * dt * net, 1e-12);
        }
    }
}

TEST(StepMoisture, StochasticStatesStayValid) {
    Rng rng(3);
    const FluxDynamics dyn{0.5, 2.0, 5.0, 1.0, 1.0, 0.5, 1.0};
    auto s = state_with(1.0, 1.0, 0.5, 1.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        s = step_moisture(s, 0.5, dyn, rng);
        EXPECT_GE(s.moisture, 0.0);
        for (double f : {s.inflow, s.outflow, s.evaporation, s.precipitation}) EXPECT_GE(f, 0.0);
        EXPECT_GE(s.temperature, kMinTemperature);
        EXPECT_LE(s.temperature, kMaxTemperature);
    }
}

TEST(FogDensity, VanishesAtZeroTemperatureAndSaturation) { EXPECT_EQ(fog_density(0.0, 1.0), 0.0); }

TEST(FogDensity, MatchesExtendedPrecisionOracle) {
    const long double a = 17.27L, b = 237.7L;
    const long double ref = a * 20.0L / (b + 20.0L) + std::log(0.8L);
    EXPECT_NEAR(fog_density(20.0, 0.8), static_cast<double>(ref), 1e-14);
}

TEST(FogDensity, IncreasesWithRelativeMoisture) {
    for (double t : {-20.0, 0.0, 15.0, 40.0}) {
        double prev = fog_density(t, 0.01);
        for (double s = 0.02; s <= 1.0; s += 0.01) {
            const double d = fog_density(t, s);
            EXPECT_GT(d, prev);
            prev = d;
        }
    }
}

TEST(FogDensity, DomainErrors) {
    EXPECT_THROW((void)fog_density(10.0, 0.0), DomainError);
    EXPECT_THROW((void)fog_density(10.0, -0.1), DomainError);
    EXPECT_THROW((void)fog_density(-237.7, 0.5), DomainError);
    EXPECT_EQ(render_fog_density(-20.0, 0.1), 0.0);
}

TEST(Memberships, FixtureStates) {
    std::ifstream in(std::string(COPRESENCE_FIXTURE_DIR) + "/membership_states.json");
    ASSERT_TRUE(in.good());
    const auto fixtures = nlohmann::json::parse(in);
    const auto cfg = default_membership_config();
    for (const auto& f : fixtures) {
        const auto& js = f.at("state");
        ScenarioState s = state_with(js.at("moisture"), js.at("inflow"), js.at("evaporation"), js.at("outflow"),
                                     js.at("precipitation"));
        s.temperature = js.at("temperature");
        const auto p = state_to_probabilities(s, cfg);
        const std::string name = f.at("name");
        const auto below = f.value("below", nlohmann::json::object());
        const auto above = f.value("above", nlohmann::json::object());
        const auto exact = f.value("exact", nlohmann::json::object());
        for (const auto& [cat, bound] : below.items())
            EXPECT_LT(p[index_of(cat)], bound.get<double>()) << name << " " << cat;
        for (const auto& [cat, bound] : above.items())
            EXPECT_GT(p[index_of(cat)], bound.get<double>()) << name << " " << cat;
        for (const auto& [cat, value] : exact.items())
            EXPECT_EQ(p[index_of(cat)], value.get<double>()) << name << " " << cat;
        if (f.contains("argmax")) {
            const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            EXPECT_EQ(category_names()[best], f.at("argmax").get<std::string>()) << name;
        }
    }
}

TEST(Memberships, MatchIndependentLogisticEvaluation) {
    // Re-evaluates the shipped table from its JSON form with long double arithmetic.
    const nlohmann::json table = default_membership_config();
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        ScenarioState s = state_with(rng.uniform(0, 40), rng.uniform(0, 4), rng.uniform(0, 2), rng.uniform(0, 4),
                                     rng.uniform(0, 5));
        s.temperature = rng.uniform(-30, 50);
        const auto p = state_to_probabilities(s, default_membership_config());
        const long double rel = std::clamp<long double>(s.moisture / 40.0L, 1e-3L, 1.0L);
        const long double fog = 17.27L * s.temperature / (237.7L + s.temperature) + std::log(rel);
        std::size_t i = 0;
        for (const auto& cat : table.at("categories")) {
            long double logit = cat.at("bias").get<double>();
            for (const auto& term : cat.at("terms")) {
                const std::string var = term.at("variable");
                const long double v = var == "moisture"        ? s.moisture
                                      : var == "temperature"   ? s.temperature
                                      : var == "fog"           ? fog
                                      : var == "precipitation" ? s.precipitation
                                                               : s.inflow + s.evaporation - s.outflow - s.precipitation;
                const long double mid = term.at("midpoint").get<double>(), slope = term.at("slope").get<double>();
                logit += term.at("kind") == "band" ? slope * (term.at("half_width").get<double>() - std::fabs(v - mid))
                                                   : slope * (v - mid);
            }
            EXPECT_NEAR(p[i], static_cast<double>(1.0L / (1.0L + std::exp(-logit))), 1e-12);
            ++i;
        }
    }
}

TEST(Memberships, ConfigRoundTripsThroughJson) {
    const auto cfg = default_membership_config();
    const nlohmann::json j = cfg;
    const auto back = j.get<MembershipConfig>();
    EXPECT_EQ(nlohmann::json(back), j);
    auto bad = j;
    bad["version"] = 2;
    EXPECT_THROW((void)bad.get<MembershipConfig>(), ConfigError);
}

TEST(Memberships, NormalizeByMaxKeepsDominantAtOne) {
    const auto out = normalize_by_max({0.2, 0.8, 0.4});
    EXPECT_EQ(out[1], 1.0);
    EXPECT_DOUBLE_EQ(out[0], 0.25);
}

TEST(RenderBlend, DegenerateWeightsGiveSingleEffectExactly) {
    Rng rng(4);
    const Image base = render_base_scene(16, 16, rng);
    const auto effects = all_effects(99);
    const std::vector<WeatherEffect> pair{effects[kRainy], effects[kFoggy]};
    EXPECT_EQ(render_blend(base, pair, {1.0, 0.0}), effects[kRainy].apply(base));
}

TEST(RenderBlend, EqualWeightsAverageConstantTints) {
    const Image base(4, 5, 0.3);
    const auto out = render_blend(base, {constant_tint(0.2), constant_tint(0.6)}, {0.5, 0.5});
    for (double v : out.data) EXPECT_DOUBLE_EQ(v, 0.4);
}

TEST(RenderBlend, MatchesPerPixelWeightedSum) {
    Rng rng(5);
    const Image base = render_base_scene(24, 24, rng);
    const auto effects = all_effects(7);
    const Image a = effects[kCloudy].apply(base), b = effects[kSnow].apply(base);
    const auto out = render_blend(base, {effects[kCloudy], effects[kSnow]}, {0.3, 0.7});
    for (std::size_t k = 0; k < out.data.size(); ++k) {
        const long double ref = 0.3L * a.data[k] + 0.7L * b.data[k];
        EXPECT_NEAR(out.data[k], static_cast<double>(std::clamp<long double>(ref, 0, 1)), 1e-12);
    }
}

TEST(RenderBlend, RejectsInvalidWeights) {
    const Image base(2, 2, 0.5);
    EXPECT_THROW((void)render_blend(base, {constant_tint(0.1), constant_tint(0.2)}, {0.5, 0.6}), DomainError);
    EXPECT_THROW((void)render_blend(base, {constant_tint(0.1), constant_tint(0.2)}, {1.5, -0.5}), DomainError);
    EXPECT_THROW((void)render_blend(base, {constant_tint(0.1)}, {0.5, 0.5}), ShapeError);
}

TEST(RenderBlend, IsLinearInWeightsBeforeClipping) {
    Rng rng(6);
    const Image base = render_base_scene(16, 16, rng);
    const auto effects = all_effects(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto w1 = random_simplex(rng, effects.size(), 3), w2 = random_simplex(rng, effects.size(), 4);
        const double a = rng.uniform();
        std::vector<double> mixed(w1.size());
        for (std::size_t i = 0; i < w1.size(); ++i) mixed[i] = a * w1[i] + (1 - a) * w2[i];
        const Image lhs = blend_unclipped(base, effects, mixed);
        const Image r1 = blend_unclipped(base, effects, w1), r2 = blend_unclipped(base, effects, w2);
        for (std::size_t k = 0; k < lhs.data.size(); ++k)
            EXPECT_NEAR(lhs.data[k], a * r1.data[k] + (1 - a) * r2.data[k], 1e-9);
    }
}

TEST(Effects, PreserveExtentAndRange) {
    Rng rng(12);
    const Image base = render_base_scene(20, 28, rng);
    for (const auto& e : all_effects(3)) {
        const Image out = e.apply(base);
        EXPECT_TRUE(out.same_extent(base)) << kCategoryNames[e.category];
        for (double v : out.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_NE(out, base) << kCategoryNames[e.category];
    }
    EXPECT_THROW((void)make_effect(14, {}), ConfigError);
}

TEST(Labels, GroundTruthIsWeightsVerbatim) {
    EXPECT_EQ(ground_truth_from_weights({0.3, 0.7}), (ProbabilityVector{0.3, 0.7}));
    EXPECT_EQ(ground_truth_from_weights({0, 1, 0}), (ProbabilityVector{0, 1, 0}));
    EXPECT_EQ(ground_truth_from_weights({0.2, 0.3, 0.5}), (ProbabilityVector{0.2, 0.3, 0.5}));
}

TEST(Labels, ErrorPropagation) {
    const double tenth = label_error_propagation(0.1);
    EXPECT_NEAR(tenth * tenth, 1e-4, 1e-18);
    EXPECT_EQ(label_error_propagation(0.0), 0.0);
    const double fifth = label_error_propagation(0.2);
    EXPECT_NEAR(fifth * fifth, 1.6e-3, 1e-17);
    EXPECT_THROW((void)label_error_propagation(1.5), DomainError);
}

TEST(Labels, Binarize) {
    EXPECT_EQ(binarize({0.3, 0.7}, 0.5), (std::vector<int>{0, 1}));
    EXPECT_EQ(binarize({0.5}, 0.5), (std::vector<int>{1}));
    EXPECT_EQ(binarize({0.2, 0.3, 0.5}, 0.25), (std::vector<int>{0, 1, 1}));
    EXPECT_THROW((void)binarize({0.5}, 1.0), DomainError);
}

TEST(Categories, FourteenNamesInTableOrder) {
    const auto names = category_names();
    ASSERT_EQ(names.size(), 14U);
    EXPECT_EQ(names.front(), "clear");
    EXPECT_EQ(names[10], "extra sunny");
    EXPECT_EQ(names.back(), "blizzard");
    EXPECT_THROW((void)category_names(0), ConfigError);
    EXPECT_THROW((void)category_names(15), ConfigError);
}
