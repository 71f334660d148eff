#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "malytics/elm.hpp"

namespace malytics {

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binary model format ("MLYT"), little-endian throughout:
///   magic[4] version:u16 n:u16 hash_size:u32 seed:u64 sparse:u8 density:f64
///   gamma:f64 c:f64 support_count:u32
///   support (l x hash_size f64, row-major) beta (l x 2 f64, row-major)
///   crc32:u32 over all preceding bytes (IEEE polynomial)
///
/// The projection matrix is regenerated from (config, seed) on load, never
/// stored. Degenerate support vectors round-trip as their all-zero values.
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace malytics
