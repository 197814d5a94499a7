#include "bcl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "bcl/errors.hpp"

namespace bcl {

namespace {

constexpr char kMagic[8] = {'B', 'C', 'L', 'C', 'K', 'P', 'T', '1'};

void push_u64_le(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void push_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint64_t read_u64_le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

uint32_t read_u32_le(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
}

size_t param_count(const NetworkSpec& spec) {
    size_t n = 0;
    Parameters z = Parameters::zeros(spec);
    for (const auto& l : z.layers) n += l.W.a.size() + l.b.size();
    return n;
}

nlohmann::json meta_json(const Model& model, const CheckpointMeta& meta) {
    nlohmann::json j;
    j["version"] = meta.version;
    j["trainer_kind"] = meta.trainer_kind;
    j["env_kind"] = meta.env_kind;
    j["eps_history"] = meta.eps_history;
    j["seeds"] = meta.seeds;
    nlohmann::json nets = nlohmann::json::array();
    for (const auto& n : model.nets) {
        nets.push_back({{"role", n.role},
                        {"layer_sizes", n.spec.layer_sizes},
                        {"dueling", n.spec.dueling}});
    }
    j["nets"] = nets;
    return j;
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path) {
    const std::string meta_str = meta_json(model, meta).dump();
    const std::vector<uint8_t> payload = serialize_params(model);

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    push_u64_le(out, meta_str.size());
    out.insert(out.end(), meta_str.begin(), meta_str.end());
    push_u64_le(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
    push_u32_le(out, crc32(payload.data(), payload.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IntegrityError("checkpoint: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw IntegrityError("checkpoint: short write: " + path);
}

std::pair<Model, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IntegrityError("checkpoint: cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());

    size_t off = 0;
    auto need = [&](size_t n) {
        if (bytes.size() - off < n) throw IntegrityError("checkpoint: truncated file: " + path);
    };
    need(8);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw IntegrityError("checkpoint: bad magic: " + path);
    off += 8;
    need(8);
    const uint64_t meta_len = read_u64_le(bytes.data() + off);
    off += 8;
    need(meta_len);
    const std::string meta_str(bytes.begin() + std::ptrdiff_t(off),
                               bytes.begin() + std::ptrdiff_t(off + meta_len));
    off += meta_len;
    need(8);
    const uint64_t payload_len = read_u64_le(bytes.data() + off);
    off += 8;
    need(payload_len);
    const uint8_t* payload = bytes.data() + off;
    off += payload_len;
    need(4);
    const uint32_t stored_crc = read_u32_le(bytes.data() + off);
    if (crc32(payload, payload_len) != stored_crc)
        throw IntegrityError("checkpoint: CRC mismatch: " + path);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint: bad metadata: ") + e.what());
    }

    CheckpointMeta meta;
    meta.version = j.value("version", 1);
    meta.trainer_kind = j.value("trainer_kind", "");
    meta.env_kind = j.value("env_kind", "");
    meta.eps_history = j.value("eps_history", std::vector<double>{});
    meta.seeds = j.value("seeds", std::vector<uint64_t>{});

    Model model;
    size_t expect = 0;
    for (const auto& nj : j.at("nets")) {
        NamedNet n;
        n.role = nj.at("role").get<std::string>();
        n.spec.layer_sizes = nj.at("layer_sizes").get<std::vector<int>>();
        n.spec.dueling = nj.at("dueling").get<bool>();
        n.spec.validate();
        n.params = Parameters::zeros(n.spec);
        expect += param_count(n.spec);
        model.nets.push_back(std::move(n));
    }
    if (expect * 8 != payload_len)
        throw IntegrityError("checkpoint: metadata shape does not match payload length");

    const uint8_t* p = payload;
    for (auto& n : model.nets) {
        for (auto& l : n.params.layers) {
            for (double& w : l.W.a) {
                w = std::bit_cast<double>(read_u64_le(p));
                p += 8;
            }
            for (double& b : l.b) {
                b = std::bit_cast<double>(read_u64_le(p));
                p += 8;
            }
        }
    }
    return {std::move(model), std::move(meta)};
}

}  // namespace bcl
