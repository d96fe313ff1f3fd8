// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>

#include "pdegen/core/module.hpp"
#include "pdegen/io/binary.hpp"

namespace pdegen::io {

// Named-tensor checkpoint.
//
//   magic   "LPCK"
//   u16     version (1)
//   u64     rng seed, u64 training step
//   f64     latent scale
//   u32     config snapshot length + UTF-8 bytes (flat key=value text)
//   u32     tensor count
//   per tensor: u16 name length + name, u8 dtype (0=f32), u8 ndim,
//               u32 dims[], raw little-endian data
struct Checkpoint {
    uint64_t seed = 0;
    uint64_t step = 0;
    double latent_scale = 1.0;
    std::string config_text;
    std::vector<std::pair<std::string, std::pair<core::Shape, std::vector<float>>>> tensors;

    const std::pair<core::Shape, std::vector<float>>& find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw DataError("checkpoint: tensor '" + name + "' missing");
    }
    bool has(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return true;
        return false;
    }
};

namespace detail {
constexpr char ckpt_magic[4] = {'L', 'P', 'C', 'K'};
constexpr uint16_t ckpt_version = 1;
}  // namespace detail

template <class T>
Checkpoint snapshot(const core::ParamRegistry<T>& reg, const std::string& config_text,
                    double latent_scale, uint64_t seed, uint64_t step) {
    Checkpoint c;
    c.seed = seed;
    c.step = step;
    c.latent_scale = latent_scale;
    c.config_text = config_text;
    for (const auto& [name, t] : reg.items()) {
        std::vector<float> data(t.data().size());
        for (size_t i = 0; i < data.size(); ++i) data[i] = float(t.data()[i]);
        c.tensors.emplace_back(name, std::make_pair(t.shape(), std::move(data)));
    }
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    atomic_write(path, [&](Writer& w) {
        w.bytes(detail::ckpt_magic, 4);
        w.pod<uint16_t>(detail::ckpt_version);
        w.pod<uint64_t>(c.seed);
        w.pod<uint64_t>(c.step);
        w.pod<double>(c.latent_scale);
        w.pod<uint32_t>(static_cast<uint32_t>(c.config_text.size()));
        w.str(c.config_text);
        w.pod<uint32_t>(static_cast<uint32_t>(c.tensors.size()));
        for (const auto& [name, t] : c.tensors) {
            w.pod<uint16_t>(static_cast<uint16_t>(name.size()));
            w.str(name);
            w.pod<uint8_t>(0);  // f32
            w.pod<uint8_t>(static_cast<uint8_t>(t.first.size()));
            for (int64_t d : t.first) w.pod<uint32_t>(static_cast<uint32_t>(d));
            w.bytes(t.second.data(), t.second.size() * 4);
        }
    });
}

inline Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, detail::ckpt_magic, 4) != 0)
        throw DataError("'" + path + "': bad checkpoint magic at offset 0");
    const auto version = r.pod<uint16_t>();
    if (version != detail::ckpt_version)
        throw DataError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.seed = r.pod<uint64_t>();
    c.step = r.pod<uint64_t>();
    c.latent_scale = r.pod<double>();
    const auto clen = r.pod<uint32_t>();
    c.config_text.resize(clen);
    if (clen) r.bytes(c.config_text.data(), clen);
    const auto count = r.pod<uint32_t>();
    for (uint32_t i = 0; i < count; ++i) {
        const auto nlen = r.pod<uint16_t>();
        std::string name(nlen, '\0');
        if (nlen) r.bytes(name.data(), nlen);
        const auto dtype = r.pod<uint8_t>();
        if (dtype != 0) throw DataError("'" + path + "': unsupported tensor dtype");
        const auto ndim = r.pod<uint8_t>();
        core::Shape shape(ndim);
        int64_t numel = 1;
        for (auto& d : shape) {
            d = r.pod<uint32_t>();
            numel *= d;
        }
        std::vector<float> data(static_cast<size_t>(numel));
        r.bytes(data.data(), data.size() * 4);
        c.tensors.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(data)));
    }
    return c;
}

// Loads values into an existing registry; names and shapes must match exactly.
template <class T>
void restore(const Checkpoint& c, core::ParamRegistry<T>& reg) {
    if (c.tensors.size() != reg.items().size())
        throw DataError("checkpoint restore: tensor count mismatch (" +
                        std::to_string(c.tensors.size()) + " in file, " +
                        std::to_string(reg.items().size()) + " in model)");
    for (const auto& [name, t] : reg.items()) {
        const auto& stored = c.find(name);
        if (stored.first != t.shape())
            throw DataError("checkpoint restore: shape mismatch for '" + name + "'");
        auto tt = t;
        auto& dst = tt.mut_data();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] = T(stored.second[i]);
    }
}

}  // namespace pdegen::io
