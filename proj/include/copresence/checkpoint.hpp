#pragma once

#include "copresence/autodiff.hpp"
#include "copresence/dataset.hpp"
#include "copresence/errors.hpp"
#include "copresence/meformer.hpp"
#include "copresence/version.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace copresence {

inline constexpr const char* kCheckpointFormat = "copresence-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    model::MeFormer model;
    std::vector<std::string> categories;
    nlohmann::json metadata = nlohmann::json::object();
};

/// JSON container of named parameter tensors, model config and category list.
/// Doubles are written in shortest round-trip form, so save → load is bit-exact.
[[nodiscard]] nlohmann::json checkpoint_json(const model::MeFormer& m, const std::vector<std::string>& categories,
                                             const nlohmann::json& metadata = nlohmann::json::object());

[[nodiscard]] Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const model::MeFormer& m,
                     const std::vector<std::string>& categories,
                     const nlohmann::json& metadata = nlohmann::json::object());

[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CompatibilityError unless the dataset lists the checkpoint's categories in the same order.
void require_same_categories(const std::vector<std::string>& checkpoint, const std::vector<std::string>& dataset);

}  // namespace copresence
