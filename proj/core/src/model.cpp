#include "bcl/model.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "bcl/errors.hpp"

namespace bcl {

const NamedNet& Model::net(const std::string& role) const {
    const NamedNet* n = find(role);
    if (!n) throw ShapeError("model has no net with role '" + role + "'");
    return *n;
}

NamedNet* Model::find(const std::string& role) {
    for (auto& n : nets)
        if (n.role == role) return &n;
    return nullptr;
}

const NamedNet* Model::find(const std::string& role) const {
    for (const auto& n : nets)
        if (n.role == role) return &n;
    return nullptr;
}

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

void push_f64_le(std::vector<uint8_t>& out, double v) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(bits >> (8 * i)));
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> serialize_params(const Model& m) {
    std::vector<uint8_t> out;
    for (const auto& n : m.nets) {
        for (const auto& l : n.params.layers) {
            for (double w : l.W.a) push_f64_le(out, w);
            for (double b : l.b) push_f64_le(out, b);
        }
    }
    return out;
}

uint32_t model_crc(const Model& m) {
    const auto bytes = serialize_params(m);
    return crc32(bytes.data(), bytes.size());
}

}  // namespace bcl
