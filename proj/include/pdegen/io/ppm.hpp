// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/geo/field_sample.hpp"
#include "pdegen/io/binary.hpp"

namespace pdegen::io {

// Minimal inferno-like color ramp.
inline void heat_color(double t, uint8_t rgb[3]) {
    static const double anchors[6][3] = {
        {0.0, 0.0, 0.2}, {0.2, 0.0, 0.5}, {0.7, 0.1, 0.4},
        {0.95, 0.4, 0.1}, {1.0, 0.8, 0.2}, {1.0, 1.0, 0.9},
    };
    t = std::min(1.0, std::max(0.0, t)) * 5.0;
    const int k = std::min(4, static_cast<int>(t));
    const double f = t - k;
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<uint8_t>(255.0 * (anchors[k][c] * (1 - f) + anchors[k + 1][c] * f));
}

// One horizontal strip of per-frame heatmaps for a grid sample channel,
// written as a binary PPM (P6). Frames are normalized jointly.
inline void write_heatmap_strip(const std::string& path, const geo::FieldSample& s, int channel,
                                int frame_stride = 1) {
    if (!s.is_grid() || s.spatial_dim != 2)
        throw UsageError("render: heatmap strips need 2-d grid samples");
    if (channel < 0 || channel >= s.channels) throw UsageError("render: channel out of range");
    const int nx = s.grid_extents[0], ny = s.grid_extents[1];
    std::vector<int> frames;
    for (int t = 0; t < s.time_count; t += frame_stride) frames.push_back(t);

    float lo = s.values[static_cast<size_t>(channel)], hi = lo;
    for (int t : frames)
        for (int m = 0; m < nx * ny; ++m) {
            const float v = s.value_at(t, m, channel);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = hi - lo > 1e-12f ? double(hi - lo) : 1.0;

    const int pad = 1;
    const int w = static_cast<int>(frames.size()) * (nx + pad) - pad;
    const int h = ny;
    atomic_write(path, [&](Writer& wr) {
        wr.str("P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n");
        std::vector<uint8_t> row(static_cast<size_t>(w) * 3, 0);
        for (int y = 0; y < h; ++y) {
            std::fill(row.begin(), row.end(), 0);
            for (size_t f = 0; f < frames.size(); ++f) {
                for (int x = 0; x < nx; ++x) {
                    // image rows run top to bottom; grid y runs bottom to top
                    const int m = x * ny + (ny - 1 - y);
                    const double t = (double(s.value_at(frames[f], m, channel)) - lo) / span;
                    uint8_t rgb[3];
                    heat_color(t, rgb);
                    const size_t px = (f * (nx + pad) + static_cast<size_t>(x)) * 3;
                    row[px] = rgb[0];
                    row[px + 1] = rgb[1];
                    row[px + 2] = rgb[2];
                }
            }
            wr.bytes(row.data(), row.size());
        }
    });
}

}  // namespace pdegen::io
