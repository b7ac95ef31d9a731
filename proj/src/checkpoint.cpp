#include "copresence/checkpoint.hpp"

#include <algorithm>

namespace copresence {

nlohmann::json checkpoint_json(const model::MeFormer& m, const std::vector<std::string>& categories,
                               const nlohmann::json& metadata) {
    if (categories.size() != m.config().categories) {
        throw CompatibilityError("checkpoint: " + std::to_string(categories.size()) +
                                 " category names for a model with " + std::to_string(m.config().categories) +
                                 " categories");
    }
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : m.params()) {
        params.push_back(
            {{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", p.value.storage()}});
    }
    return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"tool_version", kVersion},
            {"model_config", m.config()},  {"categories", categories},      {"metadata", metadata},
            {"parameters", params}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
            throw CompatibilityError("not a copresence checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw CompatibilityError("unsupported checkpoint version " + std::to_string(version));
        }
        const auto cfg = j.at("model_config").get<model::ModelConfig>();
        const auto categories = j.at("categories").get<std::vector<std::string>>();
        ParameterSet params;
        for (const auto& p : j.at("parameters")) {
            Shape shape{p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>()};
            params.add(p.at("name").get<std::string>(), Tensor(shape, p.at("data").get<std::vector<double>>()));
        }
        if (categories.size() != cfg.categories) {
            throw CompatibilityError("checkpoint lists " + std::to_string(categories.size()) +
                                     " categories but its model config expects " + std::to_string(cfg.categories));
        }
        return {model::MeFormer(cfg, std::move(params)), categories, j.value("metadata", nlohmann::json::object())};
    } catch (const nlohmann::json::exception& e) {
        throw CompatibilityError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ShapeError& e) {
        throw CompatibilityError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const model::MeFormer& m,
                     const std::vector<std::string>& categories, const nlohmann::json& metadata) {
    const std::string text = checkpoint_json(m, categories, metadata).dump() + "\n";
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        throw IoError("checkpoint '" + path.string() + "' not found");
    }
    const std::string text = data::read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

void require_same_categories(const std::vector<std::string>& checkpoint, const std::vector<std::string>& dataset) {
    if (checkpoint != dataset) {
        std::string detail = std::to_string(checkpoint.size()) + " vs " + std::to_string(dataset.size());
        for (std::size_t i = 0; i < std::min(checkpoint.size(), dataset.size()); ++i) {
            if (checkpoint[i] != dataset[i]) {
                detail = "first difference at index " + std::to_string(i) + ": '" + checkpoint[i] + "' vs '" +
                         dataset[i] + "'";
                break;
            }
        }
        throw CompatibilityError("category lists differ between checkpoint and dataset (" + detail + ")");
    }
}
}  // namespace copresence
