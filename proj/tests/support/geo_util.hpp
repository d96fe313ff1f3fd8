// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pdegen/geo/ball_index.hpp"
#include "pdegen/geo/field_sample.hpp"

namespace pdegen::test {

// O(S*Q) reference radius search with the same coordinate ordering.
inline geo::BallIndex brute_force_radius(const std::vector<double>& sources,
                                         const std::vector<double>& queries, int dim, double r) {
    geo::BallIndex out;
    out.dim = dim;
    out.radius = r;
    out.source_count = static_cast<int64_t>(sources.size()) / dim;
    const int64_t S = out.source_count;
    const int64_t Q = static_cast<int64_t>(queries.size()) / dim;
    out.offsets.assign(static_cast<size_t>(Q) + 1, 0);
    const double r2 = r * r;
    for (int64_t q = 0; q < Q; ++q) {
        std::vector<std::pair<std::vector<double>, int64_t>> hits;
        for (int64_t s = 0; s < S; ++s) {
            double d2 = 0;
            for (int d = 0; d < dim; ++d) {
                const double dd = sources[static_cast<size_t>(s * dim + d)] - queries[static_cast<size_t>(q * dim + d)];
                d2 += dd * dd;
            }
            if (d2 <= r2)
                hits.emplace_back(std::vector<double>(sources.begin() + s * dim, sources.begin() + (s + 1) * dim), s);
        }
        std::sort(hits.begin(), hits.end());
        for (auto& [k, s] : hits) out.indices.push_back(s);
        out.offsets[static_cast<size_t>(q + 1)] = static_cast<int64_t>(out.indices.size());
        if (hits.empty()) out.zero_neighbor_queries++;
    }
    return out;
}

inline bool same_neighbor_sets(const geo::BallIndex& a, const geo::BallIndex& b) {
    if (a.offsets != b.offsets) return false;
    for (int64_t q = 0; q + 1 < static_cast<int64_t>(a.offsets.size()); ++q) {
        std::vector<int64_t> sa(a.indices.begin() + a.offsets[static_cast<size_t>(q)],
                                a.indices.begin() + a.offsets[static_cast<size_t>(q + 1)]);
        std::vector<int64_t> sb(b.indices.begin() + b.offsets[static_cast<size_t>(q)],
                                b.indices.begin() + b.offsets[static_cast<size_t>(q + 1)]);
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        if (sa != sb) return false;
    }
    return true;
}

// Grid field sample covering [0,1]^2 over `t` uniform time levels; values
// from a callable (t_norm, x, y, channel) -> value.
template <class F>
geo::FieldSample make_grid_sample(int t, int nx, int ny, int channels, F f) {
    geo::FieldSample s;
    s.time_count = t;
    s.spatial_dim = 2;
    s.channels = channels;
    s.grid_extents = {nx, ny};
    s.values.resize(static_cast<size_t>(t) * nx * ny * channels);
    size_t o = 0;
    for (int k = 0; k < t; ++k) {
        const double tv = t > 1 ? double(k) / (t - 1) : 0.0;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                const double x = (i + 0.5) / nx, y = (j + 0.5) / ny;
                for (int c = 0; c < channels; ++c) s.values[o++] = float(f(tv, x, y, c));
            }
    }
    return s;
}

// Fits the least-squares slope of log10(err) against log10(m).
inline double loglog_slope(const std::vector<double>& m, const std::vector<double>& err) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(m.size());
    for (size_t i = 0; i < m.size(); ++i) {
        const double x = std::log10(m[i]), y = std::log10(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace pdegen::test
