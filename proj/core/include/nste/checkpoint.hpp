#pragma once

#include "nste/model.hpp"
#include "nste/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace nste {

struct Checkpoint {
    ModelParameters params;
    std::optional<Adam> optimizer;
    std::int64_t iteration = 0;
    std::string config_hash;
};

/// Single-file archive: magic line, little-endian u64 header length, JSON
/// header (schema, variant, geometry, tensor table, optimizer settings,
/// iteration, config hash), then the float32 payload in table order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws VariantMismatch when expected_variant is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<ModelVariant> expected_variant = std::nullopt);

}  // namespace nste
