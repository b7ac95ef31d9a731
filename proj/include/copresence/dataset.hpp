#pragma once

#include "copresence/errors.hpp"
#include "copresence/image.hpp"
#include "copresence/rng.hpp"
#include "copresence/version.hpp"
#include "copresence/weather_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace copresence::data {

/// Co-presence strata: 1, 2, 3, 4 and more than 4 categories.
inline constexpr std::array<const char*, 5> kStrata = {"1", "2", "3", "4", ">4"};

[[nodiscard]] inline std::string stratum_of(std::size_t copresent) {
    if (copresent == 0) {
        throw DomainError("a sample must contain at least one category");
    }
    return copresent > 4 ? ">4" : std::to_string(copresent);
}

struct DatasetConfig {
    std::size_t count = 2000;
    std::size_t categories = 14;
    std::size_t image_size = 64;
    std::uint64_t seed = 7;
    std::size_t max_copresent = 6;
    /// Proportions of the strata 1, 2, 3, 4, >4 before truncation by max_copresent.
    std::array<double, 5> stratum_proportions = {0.3, 0.25, 0.2, 0.15, 0.1};
    double train_fraction = 0.8;
    double binarize_threshold = 0.5;
    std::size_t moisture_steps = 6;
    double step_dt = 0.5;

    void validate() const {
        if (count == 0) {
            throw ConfigError("dataset count must be positive");
        }
        (void)sim::category_names(categories);
        if (image_size < 4) {
            throw ConfigError("image_size must be at least 4");
        }
        if (max_copresent == 0 || max_copresent > categories) {
            throw ConfigError("max_copresent must lie in [1, categories]");
        }
        double total = 0.0;
        for (double p : stratum_proportions) {
            if (!(p >= 0.0)) {
                throw ConfigError("stratum proportions must be non-negative");
            }
            total += p;
        }
        if (!(total > 0.0)) {
            throw ConfigError("stratum proportions must not all be zero");
        }
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw ConfigError("train_fraction must lie in (0, 1)");
        }
        if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
            throw ConfigError("binarize_threshold must lie in (0, 1)");
        }
        if (!(step_dt > 0.0)) {
            throw ConfigError("step_dt must be positive");
        }
        if (effective_proportions() == std::array<double, 5>{}) {
            throw ConfigError("no stratum is reachable with the given max_copresent and proportions");
        }
    }

    /// Proportions with strata above max_copresent removed, renormalized.
    [[nodiscard]] std::array<double, 5> effective_proportions() const {
        std::array<double, 5> p{};
        double total = 0.0;
        for (std::size_t s = 0; s < 5; ++s) {
            const std::size_t min_count = s + 1;
            if (min_count <= max_copresent) {
                p[s] = stratum_proportions[s];
                total += p[s];
            }
        }
        if (total > 0.0) {
            for (double& v : p) {
                v /= total;
            }
        }
        return p;
    }
};

inline void to_json(nlohmann::json& j, const DatasetConfig& c) {
    j = nlohmann::json{{"count", c.count},
                       {"categories", c.categories},
                       {"image_size", c.image_size},
                       {"seed", c.seed},
                       {"max_copresent", c.max_copresent},
                       {"stratum_proportions", c.stratum_proportions},
                       {"train_fraction", c.train_fraction},
                       {"binarize_threshold", c.binarize_threshold},
                       {"moisture_steps", c.moisture_steps},
                       {"step_dt", c.step_dt}};
}

/// Strict reader: unknown keys are rejected, missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, DatasetConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("dataset config must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "count") c.count = value.get<std::size_t>();
        else if (key == "categories") c.categories = value.get<std::size_t>();
        else if (key == "image_size") c.image_size = value.get<std::size_t>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "max_copresent") c.max_copresent = value.get<std::size_t>();
        else if (key == "stratum_proportions") c.stratum_proportions = value.get<std::array<double, 5>>();
        else if (key == "train_fraction") c.train_fraction = value.get<double>();
        else if (key == "binarize_threshold") c.binarize_threshold = value.get<double>();
        else if (key == "moisture_steps") c.moisture_steps = value.get<std::size_t>();
        else if (key == "step_dt") c.step_dt = value.get<double>();
        else throw ConfigError("unknown dataset config key '" + key + "'");
    }
}

/// One manifest row plus (when generated or loaded) its pixels.
struct SceneSample {
    std::string file;
    std::vector<double> label_prob;
    std::vector<int> label_binary;
    std::vector<double> blend_weights;
    std::string stratum;
    std::string split;
    std::uint64_t scenario_seed = 0;
    Image image;

    [[nodiscard]] std::size_t copresent() const {
        return static_cast<std::size_t>(
            std::count_if(blend_weights.begin(), blend_weights.end(), [](double w) { return w > 0.0; }));
    }
};

inline nlohmann::json manifest_row(const SceneSample& s) {
    nlohmann::json j;
    j["file"] = s.file;
    j["label_prob"] = s.label_prob;
    j["label_binary"] = s.label_binary;
    j["blend_weights"] = s.blend_weights;
    j["stratum"] = s.stratum;
    j["split"] = s.split;
    j["scenario_seed"] = s.scenario_seed;
    return j;
}

/// Per-stratum sample counts (largest-remainder rounding of count × proportion).
[[nodiscard]] inline std::array<std::size_t, 5> stratum_counts(const DatasetConfig& cfg) {
    const auto p = cfg.effective_proportions();
    std::array<std::size_t, 5> counts{};
    std::array<double, 5> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 5; ++s) {
        const double exact = p[s] * static_cast<double>(cfg.count);
        counts[s] = static_cast<std::size_t>(std::floor(exact));
        remainder[s] = exact - std::floor(exact);
        assigned += counts[s];
    }
    while (assigned < cfg.count) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < 5; ++s) {
            if (remainder[s] > remainder[best]) {
                best = s;
            }
        }
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }
    return counts;
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

/// Random atmospheric scenario advanced through a few moisture steps.
[[nodiscard]] inline sim::ScenarioState sample_scenario(Rng& rng, const DatasetConfig& cfg) {
    sim::ScenarioState s;
    s.moisture = rng.uniform(0.0, sim::kMoistureCapacity);
    s.temperature = rng.uniform(-25.0, 45.0);
    s.inflow = rng.uniform(0.0, 4.0);
    s.outflow = rng.uniform(0.0, 4.0);
    s.evaporation = rng.uniform(0.0, 2.0);
    s.precipitation = rng.uniform(0.0, 5.0) * s.relative_moisture();
    sim::FluxDynamics dyn{0.5, 0.3, 1.0, s.inflow, s.outflow, s.evaporation, s.precipitation};
    for (std::size_t k = 0; k < cfg.moisture_steps; ++k) {
        s = sim::step_moisture(s, cfg.step_dt, dyn, rng);
    }
    s.moisture = std::min(s.moisture, sim::kMoistureCapacity);
    return s;
}

/// Picks `k` categories (membership-weighted, without replacement) and turns memberships into
/// convex blend weights. Every chosen category gets a strictly positive weight.
[[nodiscard]] inline std::vector<double> choose_blend_weights(const std::vector<double>& memberships, std::size_t k,
                                                              Rng& rng) {
    const std::size_t n = memberships.size();
    const auto dominant = sim::normalize_by_max(memberships);
    std::vector<double> pick_weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        pick_weight[i] = dominant[i] + 0.05;
    }
    std::vector<double> weights(n, 0.0);
    for (std::size_t chosen = 0; chosen < k; ++chosen) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += weights[i] > 0.0 ? 0.0 : pick_weight[i];
        }
        double r = rng.uniform() * total;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] > 0.0) {
                continue;
            }
            pick = i;
            r -= pick_weight[i];
            if (r < 0.0) {
                break;
            }
        }
        weights[pick] = 0.15 + 0.85 * dominant[pick] * rng.uniform(0.6, 1.0);
    }
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) {
        w /= sum;
    }
    return weights;
}

/// Everything generate_dataset produces, kept in memory.
struct GeneratedDataset {
    DatasetConfig config;
    std::vector<std::string> categories;
    sim::MembershipConfig memberships;
    std::vector<SceneSample> samples;
};

/// Renders one sample. Depends only on (config, membership table, index, stratum).
[[nodiscard]] inline SceneSample generate_sample(const DatasetConfig& cfg, const sim::MembershipConfig& members,
                                                 std::size_t index, std::size_t copresent) {
    SceneSample s;
    s.scenario_seed = stream_seed(cfg.seed, index);
    Rng rng(s.scenario_seed);
    const sim::ScenarioState state = sample_scenario(rng, cfg);
    auto memberships = sim::state_to_probabilities(state, members);
    memberships.resize(cfg.categories);
    s.blend_weights = choose_blend_weights(memberships, copresent, rng);

    const Image base = sim::render_base_scene(cfg.image_size, cfg.image_size, rng);
    sim::EffectTexture tex;
    tex.seed = rng.next_u64();
    tex.phase = rng.uniform();
    tex.bolt_position = rng.uniform(0.2, 0.8);
    tex.fog_strength = 0.6 + 0.3 * std::min(1.0, sim::render_fog_density(state.temperature, state.relative_moisture()));
    std::vector<sim::WeatherEffect> effects;
    for (std::size_t c = 0; c < cfg.categories; ++c) {
        effects.push_back(sim::make_effect(c, tex));
    }
    s.image = sim::render_blend(base, effects, s.blend_weights);
    s.label_prob = sim::ground_truth_from_weights(s.blend_weights);
    s.label_binary = sim::binarize(s.label_prob, cfg.binarize_threshold);
    s.stratum = stratum_of(copresent);
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06zu.png", index);
    s.file = name;
    return s;
}

/// Pure function of the config: strata, splits and pixels are all seed-derived.
[[nodiscard]] inline GeneratedDataset generate_in_memory(const DatasetConfig& cfg,
                                                         const sim::MembershipConfig& members =
                                                             sim::default_membership_config()) {
    cfg.validate();
    if (members.categories.size() < cfg.categories) {
        throw ConfigError("membership config has fewer categories than requested");
    }
    GeneratedDataset out;
    out.config = cfg;
    out.categories = sim::category_names(cfg.categories);
    out.memberships = members;

    // Stratum per sample: exact counts, then a seeded permutation.
    const auto counts = stratum_counts(cfg);
    std::vector<std::size_t> strata;
    for (std::size_t s = 0; s < 5; ++s) {
        strata.insert(strata.end(), counts[s], s);
    }
    Rng strata_rng(stream_seed(cfg.seed, 0x5354524154ULL));
    seeded_shuffle(strata, strata_rng);

    std::vector<std::size_t> order(cfg.count);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(stream_seed(cfg.seed, 0x53504c4954ULL));
    seeded_shuffle(order, split_rng);
    const auto train_count = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.count)));
    std::vector<bool> is_train(cfg.count, false);
    for (std::size_t i = 0; i < train_count; ++i) {
        is_train[order[i]] = true;
    }

    out.samples.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        std::size_t copresent = strata[i] + 1;
        if (strata[i] == 4) {
            // ">4": spread uniformly over 5..max_copresent.
            copresent = 5 + static_cast<std::size_t>(stream_seed(cfg.seed, i + 0x9000000ULL) % (cfg.max_copresent - 4));
        }
        SceneSample s = generate_sample(cfg, members, i, copresent);
        s.split = is_train[i] ? "train" : "test";
        out.samples.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------------------------

inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kCategoriesFile = "categories.json";
inline constexpr const char* kMembershipFile = "membership_config.json";
inline constexpr const char* kDatasetConfigFile = "dataset_config.json";

/// Path → bytes for every file of the dataset directory.
[[nodiscard]] inline std::map<std::string, std::vector<std::uint8_t>> dataset_files(const GeneratedDataset& ds) {
    auto to_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
    std::map<std::string, std::vector<std::uint8_t>> files;
    std::string manifest;
    for (const auto& s : ds.samples) {
        manifest += manifest_row(s).dump();
        manifest += '\n';
        files[s.file] = encode_png(s.image);
    }
    files[kManifestFile] = to_bytes(manifest);
    files[kCategoriesFile] = to_bytes(nlohmann::json(ds.categories).dump(2) + "\n");
    files[kMembershipFile] = to_bytes(nlohmann::json(ds.memberships).dump(2) + "\n");
    nlohmann::json meta{{"tool_version", kVersion}, {"config", ds.config}};
    files[kDatasetConfigFile] = to_bytes(meta.dump(2) + "\n");
    return files;
}

struct WriteSummary {
    std::size_t files_written = 0;
    std::size_t files_unchanged = 0;
    [[nodiscard]] bool unchanged() const noexcept { return files_written == 0; }
};

/// Writes the dataset directory; files whose bytes already match are left untouched.
inline WriteSummary write_dataset(const GeneratedDataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) {
        throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());
    }
    WriteSummary summary;
    for (const auto& [rel, bytes] : dataset_files(ds)) {
        const fs::path path = dir / rel;
        if (fs::exists(path) && fs::file_size(path) == bytes.size() && read_file_bytes(path) == bytes) {
            ++summary.files_unchanged;
            continue;
        }
        write_file_bytes(path, bytes);
        ++summary.files_written;
    }
    return summary;
}

inline GeneratedDataset generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir,
                                         WriteSummary* summary = nullptr) {
    GeneratedDataset ds = generate_in_memory(cfg);
    const auto s = write_dataset(ds, dir);
    if (summary != nullptr) {
        *summary = s;
    }
    return ds;
}

/// A dataset directory read back from disk.
struct Dataset {
    std::filesystem::path root;
    std::vector<std::string> categories;
    std::vector<SceneSample> samples;

    [[nodiscard]] std::vector<const SceneSample*> split(const std::string& name) const {
        std::vector<const SceneSample*> out;
        for (const auto& s : samples) {
            if (s.split == name) {
                out.push_back(&s);
            }
        }
        return out;
    }
};

[[nodiscard]] inline std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return {bytes.begin(), bytes.end()};
}

/// Loads manifest, categories and (optionally) pixels. Throws IoError on unreadable input.
[[nodiscard]] inline Dataset load_dataset(const std::filesystem::path& dir, bool load_images = true) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw IoError("dataset directory '" + dir.string() + "' does not exist");
    }
    Dataset ds;
    ds.root = dir;
    try {
        ds.categories = nlohmann::json::parse(read_text_file(dir / kCategoriesFile)).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed categories.json: ") + e.what());
    }
    std::istringstream manifest(read_text_file(dir / kManifestFile));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        SceneSample s;
        try {
            const auto j = nlohmann::json::parse(line);
            s.file = j.at("file").get<std::string>();
            s.label_prob = j.at("label_prob").get<std::vector<double>>();
            s.label_binary = j.at("label_binary").get<std::vector<int>>();
            s.blend_weights = j.at("blend_weights").get<std::vector<double>>();
            s.stratum = j.at("stratum").get<std::string>();
            s.split = j.at("split").get<std::string>();
            s.scenario_seed = j.at("scenario_seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (s.label_prob.size() != ds.categories.size()) {
            throw IoError("manifest line " + std::to_string(line_no) + ": label length does not match categories");
        }
        if (load_images) {
            s.image = read_png(dir / s.file);
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) {
        throw IoError("dataset '" + dir.string() + "' has no samples");
    }
    return ds;
}

}  // namespace copresence::data
