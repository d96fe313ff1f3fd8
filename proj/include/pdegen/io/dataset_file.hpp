// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "pdegen/geo/field_sample.hpp"
#include "pdegen/io/binary.hpp"

namespace pdegen::io {

// Binary trajectory container.
//
//   magic   "LPDE"
//   u16     format version (1)
//   u8      layout: 0 = grid, 1 = mesh
//   u8      precision: 0 = float32 little-endian
//   u32     sample count
//   u32     T, u32 D, u32 d_p
//   u32     M (mesh point count; 0 for grid layout)
//   u8      extent count, u32 extents[] (grid layout; absent dims: 0)
//   per sample: u64 payload bytes, then
//     mesh: coords (M*D f32) followed by values (T*M*d_p f32)
//     grid: values (T*prod(extents)*d_p f32)
//
// A JSON sidecar at <path>.meta.json carries captions, generator parameters,
// normalization statistics and the train/val split.
struct DatasetBundle {
    std::vector<geo::FieldSample> samples;
    nlohmann::json meta;
};

namespace detail {
constexpr char dataset_magic[4] = {'L', 'P', 'D', 'E'};
constexpr uint16_t dataset_version = 1;

inline int64_t payload_bytes(const geo::FieldSample& s) {
    int64_t n = static_cast<int64_t>(s.values.size());
    if (!s.is_grid()) n += static_cast<int64_t>(s.coords.size());
    return n * 4;
}
}  // namespace detail

inline std::string sidecar_path(const std::string& path) { return path + ".meta.json"; }

inline void write_dataset(const std::string& path, const DatasetBundle& bundle) {
    if (bundle.samples.empty()) throw DataError("dataset write: no samples");
    const auto& first = bundle.samples.front();
    for (const auto& s : bundle.samples) {
        s.validate();
        if (s.time_count != first.time_count || s.spatial_dim != first.spatial_dim ||
            s.channels != first.channels || s.grid_extents != first.grid_extents ||
            s.point_count() != first.point_count())
            throw DataError("dataset write: samples must share one layout");
    }
    atomic_write(path, [&](Writer& w) {
        w.bytes(detail::dataset_magic, 4);
        w.pod<uint16_t>(detail::dataset_version);
        w.pod<uint8_t>(first.is_grid() ? 0 : 1);
        w.pod<uint8_t>(0);  // f32
        w.pod<uint32_t>(static_cast<uint32_t>(bundle.samples.size()));
        w.pod<uint32_t>(static_cast<uint32_t>(first.time_count));
        w.pod<uint32_t>(static_cast<uint32_t>(first.spatial_dim));
        w.pod<uint32_t>(static_cast<uint32_t>(first.channels));
        w.pod<uint32_t>(first.is_grid() ? 0u : static_cast<uint32_t>(first.point_count()));
        w.pod<uint8_t>(static_cast<uint8_t>(first.grid_extents.size()));
        for (int e : first.grid_extents) w.pod<uint32_t>(static_cast<uint32_t>(e));
        for (const auto& s : bundle.samples) {
            w.pod<uint64_t>(static_cast<uint64_t>(detail::payload_bytes(s)));
            if (!s.is_grid()) w.bytes(s.coords.data(), s.coords.size() * 4);
            w.bytes(s.values.data(), s.values.size() * 4);
        }
    });
    atomic_write(sidecar_path(path), [&](Writer& w) { w.str(bundle.meta.dump(2)); });
}

inline DatasetBundle read_dataset(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, detail::dataset_magic, 4) != 0)
        throw DataError("'" + path + "': bad dataset magic at offset 0 (got '" +
                        std::string(magic, 4) + "', want 'LPDE')");
    const auto version = r.pod<uint16_t>();
    if (version != detail::dataset_version)
        throw DataError("'" + path + "': unsupported dataset version " + std::to_string(version) +
                        " (reader supports " + std::to_string(detail::dataset_version) + ")");
    const auto layout = r.pod<uint8_t>();
    const auto precision = r.pod<uint8_t>();
    if (layout > 1) throw DataError("'" + path + "': unknown layout flag");
    if (precision != 0) throw DataError("'" + path + "': unsupported precision flag");
    const auto count = r.pod<uint32_t>();
    const auto T = r.pod<uint32_t>();
    const auto D = r.pod<uint32_t>();
    const auto dp = r.pod<uint32_t>();
    const auto M = r.pod<uint32_t>();
    const auto extent_count = r.pod<uint8_t>();
    std::vector<int> extents(extent_count);
    for (auto& e : extents) e = static_cast<int>(r.pod<uint32_t>());

    int64_t points = M;
    if (layout == 0) {
        points = 1;
        for (int e : extents) points *= e;
        if (extent_count != D) throw DataError("'" + path + "': extent count does not match D");
    }
    const int64_t want_values = int64_t(T) * points * dp;
    const int64_t want_coords = layout == 1 ? int64_t(M) * D : 0;

    DatasetBundle out;
    for (uint32_t i = 0; i < count; ++i) {
        const auto bytes = r.pod<uint64_t>();
        if (bytes != static_cast<uint64_t>((want_values + want_coords) * 4))
            throw DataError("'" + path + "': sample " + std::to_string(i) + " chunk length " +
                            std::to_string(bytes) + " does not match header dims (want " +
                            std::to_string((want_values + want_coords) * 4) + ")");
        geo::FieldSample s;
        s.time_count = static_cast<int>(T);
        s.spatial_dim = static_cast<int>(D);
        s.channels = static_cast<int>(dp);
        s.grid_extents = layout == 0 ? extents : std::vector<int>{};
        if (layout == 1) {
            s.coords.resize(static_cast<size_t>(want_coords));
            r.bytes(s.coords.data(), s.coords.size() * 4);
        }
        s.values.resize(static_cast<size_t>(want_values));
        r.bytes(s.values.data(), s.values.size() * 4);
        out.samples.push_back(std::move(s));
    }

    std::ifstream side(sidecar_path(path));
    if (side) {
        try {
            side >> out.meta;
        } catch (const std::exception& e) {
            throw DataError("'" + sidecar_path(path) + "': invalid sidecar JSON: " + e.what());
        }
    }
    if (out.meta.contains("channel_names")) {
        for (auto& s : out.samples) {
            s.channel_names = out.meta["channel_names"].get<std::vector<std::string>>();
            if (out.meta.contains("stats")) {
                s.stats.mean = out.meta["stats"]["mean"].get<std::vector<double>>();
                s.stats.stddev = out.meta["stats"]["stddev"].get<std::vector<double>>();
            }
        }
    }
    return out;
}

// Split indices recorded in the sidecar.
inline std::vector<int> split_indices(const nlohmann::json& meta, const std::string& name) {
    if (!meta.contains("split") || !meta["split"].contains(name))
        throw DataError("dataset sidecar has no '" + name + "' split");
    return meta["split"][name].get<std::vector<int>>();
}

}  // namespace pdegen::io
