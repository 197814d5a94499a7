#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcl/nn.hpp"

namespace bcl {

// A trained model is one or more named networks: {"q"} for DQN,
// {"policy", "value"} for PPO. The mock trainer uses a single 1x1 net.
struct NamedNet {
    std::string role;
    NetworkSpec spec;
    Parameters params;
};

struct Model {
    std::vector<NamedNet> nets;

    const NamedNet& net(const std::string& role) const;
    NamedNet* find(const std::string& role);
    const NamedNet* find(const std::string& role) const;
};

// CRC-32 (IEEE, reflected 0xEDB88320) over bytes; used for checkpoint
// integrity and bootstrap checksums.
uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed = 0);

// Serialize all parameters as little-endian 64-bit reals, layer-ordered
// (W row-major then b, net by net).
std::vector<uint8_t> serialize_params(const Model& m);
uint32_t model_crc(const Model& m);

}  // namespace bcl
