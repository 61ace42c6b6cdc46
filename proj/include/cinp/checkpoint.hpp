#pragma once

#include <cstdint>
#include <filesystem>

#include "cinp/config.hpp"
#include "cinp/encoders.hpp"
#include "cinp/optim.hpp"

namespace cinp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Config config;
    ModelParams params;
    AdamState optimizer;
    std::uint64_t step = 0;
};

// Layout (little-endian):
//   "CINP" | u32 version | u64 json_len | config JSON | u64 step
//   | u64 adam_step | f64 beta1 | f64 beta2 | f64 eps | f64 weight_decay
//   | u32 n_records | records... | u64 FNV-1a of all preceding bytes
// record: u32 name_len | name | u8 dtype (1 = f64) | u32 rank | u64 dims[rank] | payload
// Parameters are stored under their names; Adam moments as "adam.m/<name>"
// and "adam.v/<name>".
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cinp
