#pragma once

#include "copresence/dataset.hpp"
#include "copresence/errors.hpp"
#include "copresence/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace copresence {

/// One declarative document holding dataset generation, training and output settings.
struct CliConfig {
    data::DatasetConfig dataset;
    train::TrainConfig train;
    std::string dataset_dir;  // optional default for commands that take a dataset
    std::string output_dir;   // optional default for commands that write a run directory
};

inline void to_json(nlohmann::json& j, const CliConfig& c) {
    j = nlohmann::json{{"dataset", c.dataset}, {"train", c.train}};
    if (!c.dataset_dir.empty()) j["dataset_dir"] = c.dataset_dir;
    if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
}

inline void from_json(const nlohmann::json& j, CliConfig& c) {
    if (!j.is_object()) {
        throw ConfigError("config document must be a JSON object");
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "dataset") c.dataset = v.get<data::DatasetConfig>();
        else if (key == "train") c.train = v.get<train::TrainConfig>();
        else if (key == "dataset_dir") c.dataset_dir = v.get<std::string>();
        else if (key == "output_dir") c.output_dir = v.get<std::string>();
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

[[nodiscard]] inline CliConfig parse_cli_config(const std::string& text) {
    try {
        auto c = nlohmann::json::parse(text).get<CliConfig>();
        c.dataset.validate();
        c.train.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

/// Reads a config file; a missing path yields the defaults.
[[nodiscard]] inline CliConfig load_cli_config(const std::optional<std::filesystem::path>& path) {
    if (!path) {
        return {};
    }
    if (!std::filesystem::is_regular_file(*path)) {
        throw ConfigError("config file '" + path->string() + "' not found");
    }
    return parse_cli_config(data::read_text_file(*path));
}

/// Applies a seed override (the value of COPRESENCE_SEED) to both dataset and training seeds.
inline void apply_seed_override(CliConfig& c, const char* value) {
    if (value == nullptr || *value == '\0') {
        return;
    }
    const std::string text = value;
    try {
        std::size_t pos = 0;
        const unsigned long long seed = std::stoull(text, &pos);
        if (pos != text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        c.dataset.seed = seed;
        c.train.seed = seed;
    } catch (const std::logic_error&) {
        throw ConfigError("COPRESENCE_SEED must be an unsigned integer, got '" + text + "'");
    }
}

}  // namespace copresence
