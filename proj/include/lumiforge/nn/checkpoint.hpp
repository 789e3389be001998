#pragma once

// Checkpoint file:
//   "LUMICKPT" | u32 version | u64 header bytes | JSON header | f32 blobs
// Blobs are little-endian float32: parameters, then Adam m, then Adam v,
// each laid out as described by the header's "params" table.

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/nn/network.hpp"

namespace lumiforge::nn {

inline constexpr char kCheckpointMagic[8] = {'L', 'U', 'M', 'I', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((std::uint64_t(v) >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char b[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw LoadError("checkpoint truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return U(v);
}

inline void put_floats(std::ostream& os, std::span<const float> v) {
    for (float f : v) put_le(os, std::bit_cast<std::uint32_t>(f));
}

inline void get_floats(std::istream& is, std::span<float> v) {
    for (float& f : v) f = std::bit_cast<float>(get_le<std::uint32_t>(is));
}

}  // namespace detail

struct CheckpointMeta {
    std::uint64_t step = 0;
    nlohmann::json extra = nlohmann::json::object();
};

inline void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                            const CheckpointMeta& meta = {}) {
    const auto& store = net.params();
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : store.infos()) params.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", p.offset}});
    const nlohmann::json header{{"spec", net.spec()},
                                {"step", meta.step},
                                {"adam_step", store.adam_step()},
                                {"param_count", store.count()},
                                {"params", params},
                                {"blobs", {"values", "adam_m", "adam_v"}},
                                {"extra", meta.extra}};
    const std::string text = header.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_le(os, kCheckpointVersion);
    detail::put_le(os, std::uint64_t(text.size()));
    os.write(text.data(), std::streamsize(text.size()));
    detail::put_floats(os, store.values());
    detail::put_floats(os, store.adam_m());
    detail::put_floats(os, store.adam_v());
    if (!os) throw IoError("failed writing checkpoint " + path.string());
}

struct LoadedCheckpoint {
    Network<float> net;
    CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw LoadError(path.string() + " is not a checkpoint");
    }
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
    const auto len = detail::get_le<std::uint64_t>(is);
    if (len > (std::uint64_t{1} << 30)) throw LoadError("checkpoint header too large");
    std::string text(len, '\0');
    if (!is.read(text.data(), std::streamsize(len))) throw LoadError("checkpoint truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("checkpoint header: ") + e.what());
    }
    LoadedCheckpoint ck{Network<float>(header.at("spec").get<NetworkSpec>()), {}};
    auto& store = ck.net.params();
    const auto& params = header.at("params");
    if (params.size() != store.infos().size() || header.at("param_count").get<std::size_t>() != store.count()) {
        throw LoadError("checkpoint parameter table does not match its spec");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = store.info(i);
        if (params[i].at("name").get<std::string>() != p.name ||
            params[i].at("shape").get<std::vector<std::size_t>>() != p.shape ||
            params[i].at("offset").get<std::size_t>() != p.offset) {
            throw LoadError("checkpoint parameter " + std::to_string(i) + " does not match its spec");
        }
    }
    detail::get_floats(is, store.values());
    detail::get_floats(is, store.adam_m());
    detail::get_floats(is, store.adam_v());
    store.set_adam_step(header.at("adam_step").get<std::uint64_t>());
    ck.meta.step = header.at("step").get<std::uint64_t>();
    ck.meta.extra = header.value("extra", nlohmann::json::object());
    return ck;
}

}  // namespace lumiforge::nn
