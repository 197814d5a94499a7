#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bcl/model.hpp"

namespace bcl {

// .bclckpt layout: magic "BCLCKPT1" | u64 meta length | metadata JSON |
// u64 payload length | parameters (little-endian f64, layer-ordered) |
// u32 CRC-32 of the payload.
struct CheckpointMeta {
    int version = 1;
    std::string trainer_kind;  // "dqn" | "ppo" | "mock"
    std::string env_kind;
    std::vector<double> eps_history;
    std::vector<uint64_t> seeds;
};

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path);

// Throws IntegrityError on truncation, bad magic, CRC mismatch, or a payload
// length that disagrees with the metadata shapes.
std::pair<Model, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace bcl
