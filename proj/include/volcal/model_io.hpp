#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "volcal/dataset.hpp"
#include "volcal/mlp.hpp"
#include "volcal/preprocess.hpp"

namespace volcal {

enum class ModelRole { direct, pricing };

std::string_view role_name(ModelRole r);

/// Everything needed for inference. Direct models carry a whitener for their
/// surface inputs; pricing models map scaled parameters to vols.
struct ModelBundle {
    ModelRole role = ModelRole::direct;
    ModelKind model = ModelKind::heston;
    MlpSpec spec;
    MlpWeights weights;
    std::optional<Whitener> whitener;
    ParameterScaler scaler;
    VolGrid grid;

    bool operator==(const ModelBundle&) const = default;
};

/// Text container: a "volcal-model v1" line, a line with the payload length
/// and its FNV-1a 64 checksum, then a JSON payload.
std::string serialize_model(const ModelBundle& m);
ModelBundle deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const ModelBundle& m);
/// Throws ModelFileError (version, checksum, truncated, malformed).
ModelBundle load_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace volcal
