// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pdegen/core/errors.hpp"
#include "pdegen/core/tensor.hpp"

namespace pdegen::geo {

// Per-channel normalization statistics of the dataset a sample came from.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// A spatio-temporal PDE solution on T uniform time levels and M spatial
// collocation points. Grid layout stores extents and implies cell-center
// coordinates; mesh layout stores explicit coordinates. All coordinates are
// normalized to [0,1] per axis; values are physical-channel data.
struct FieldSample {
    int time_count = 0;                  // T
    int spatial_dim = 0;                 // D
    int channels = 0;                    // d_p
    std::vector<int> grid_extents;       // grid layout: per-axis counts (empty for mesh)
    std::vector<float> coords;           // mesh layout: M*D spatial coords in [0,1]
    std::vector<float> values;           // T*M*d_p row-major
    std::vector<std::string> channel_names;
    ChannelStats stats;                  // stats the values were normalized with (optional)

    bool is_grid() const { return !grid_extents.empty(); }

    int point_count() const {
        if (is_grid()) {
            int m = 1;
            for (int e : grid_extents) m *= e;
            return m;
        }
        return spatial_dim == 0 ? 0 : static_cast<int>(coords.size()) / spatial_dim;
    }

    double time_at(int k) const {
        return time_count > 1 ? double(k) / double(time_count - 1) : 0.0;
    }

    // Spatial coordinate of point m along axis d (grid: cell centers).
    double coord_at(int m, int d) const {
        if (!is_grid()) return coords[static_cast<size_t>(m * spatial_dim + d)];
        int rem = m;
        for (int a = spatial_dim - 1; a >= 0; --a) {
            const int e = grid_extents[static_cast<size_t>(a)];
            const int idx = rem % e;
            rem /= e;
            if (a == d) return (idx + 0.5) / double(e);
        }
        throw UsageError("coord_at: axis out of range");
    }

    float value_at(int t, int m, int c) const {
        return values[static_cast<size_t>((t * point_count() + m) * channels + c)];
    }

    void validate() const {
        if (time_count <= 0 || channels <= 0 || spatial_dim <= 0)
            throw DataError("field sample: non-positive dims");
        const int m = point_count();
        if (static_cast<int64_t>(values.size()) != int64_t(time_count) * m * channels)
            throw DataError("field sample: value array length does not match T*M*d_p");
        if (!is_grid()) {
            for (float c : coords)
                if (!(c >= 0.0f && c <= 1.0f)) throw DataError("field sample: coordinate outside [0,1]");
        }
        for (float v : values)
            if (!std::isfinite(v)) throw DataError("field sample: non-finite value");
    }

    // Flattened space-time coordinates [T*M, 1+D], time first.
    std::vector<double> spacetime_coords() const {
        const int m = point_count();
        std::vector<double> out(static_cast<size_t>(time_count) * m * (1 + spatial_dim));
        size_t o = 0;
        for (int t = 0; t < time_count; ++t) {
            const double tv = time_at(t);
            for (int p = 0; p < m; ++p) {
                out[o++] = tv;
                for (int d = 0; d < spatial_dim; ++d) out[o++] = coord_at(p, d);
            }
        }
        return out;
    }

    // Values as a [T*M, d_p] tensor of the requested scalar type.
    template <class T>
    core::Tensor<T> values_tensor() const {
        std::vector<T> v(values.size());
        for (size_t i = 0; i < values.size(); ++i) v[i] = T(values[i]);
        return core::Tensor<T>::from_data(
            {int64_t(time_count) * point_count(), channels}, std::move(v));
    }

    // First frame (t=0) as a spatial-only sample.
    FieldSample first_frame() const {
        FieldSample f = *this;
        f.time_count = 1;
        const int m = point_count();
        f.values.assign(values.begin(), values.begin() + int64_t(m) * channels);
        return f;
    }
};

// Per-channel mean/std over a collection of samples.
inline ChannelStats compute_channel_stats(const std::vector<FieldSample>& samples) {
    if (samples.empty()) throw DataError("channel stats: no samples");
    const int c = samples.front().channels;
    ChannelStats st;
    st.mean.assign(static_cast<size_t>(c), 0.0);
    st.stddev.assign(static_cast<size_t>(c), 0.0);
    int64_t count = 0;
    for (const auto& s : samples) {
        for (size_t i = 0; i < s.values.size(); ++i)
            st.mean[i % static_cast<size_t>(c)] += double(s.values[i]);
        count += static_cast<int64_t>(s.values.size()) / c;
    }
    for (auto& m : st.mean) m /= double(count);
    for (const auto& s : samples)
        for (size_t i = 0; i < s.values.size(); ++i) {
            const double d = double(s.values[i]) - st.mean[i % static_cast<size_t>(c)];
            st.stddev[i % static_cast<size_t>(c)] += d * d;
        }
    for (auto& v : st.stddev) v = std::max(std::sqrt(v / double(count)), 1e-8);
    return st;
}

// Uniform latent grid layout: T_l time levels at j/(T_l-1) and per-axis cell
// centers; `radius` is the aggregation ball radius in normalized units.
struct LatentGridSpec {
    int time_count = 0;
    std::vector<int> extents;
    double radius = 0.0425;

    int cell_count() const {
        int m = 1;
        for (int e : extents) m *= e;
        return time_count * m;
    }

    void validate() const {
        if (radius <= 0) throw UsageError("latent grid: radius must be positive");
        if (time_count < 2) throw UsageError("latent grid: need at least 2 time levels");
        for (int e : extents)
            if (e < 1) throw UsageError("latent grid: non-positive extent");
    }

    // Space-time coordinates of all cells, [T_l*M_l, 1+D], time outermost.
    std::vector<double> spacetime_coords() const {
        const int d = static_cast<int>(extents.size());
        int m = 1;
        for (int e : extents) m *= e;
        std::vector<double> out(static_cast<size_t>(cell_count()) * (1 + d));
        size_t o = 0;
        for (int t = 0; t < time_count; ++t) {
            const double tv = time_count > 1 ? double(t) / double(time_count - 1) : 0.0;
            for (int p = 0; p < m; ++p) {
                out[o++] = tv;
                int rem = p;
                std::vector<double> x(static_cast<size_t>(d));
                for (int a = d - 1; a >= 0; --a) {
                    const int e = extents[static_cast<size_t>(a)];
                    x[static_cast<size_t>(a)] = (rem % e + 0.5) / double(e);
                    rem /= e;
                }
                for (int a = 0; a < d; ++a) out[o++] = x[static_cast<size_t>(a)];
            }
        }
        return out;
    }

    // Spatial-only cell centers, [M_l, D].
    std::vector<double> spatial_coords() const {
        const int d = static_cast<int>(extents.size());
        int m = 1;
        for (int e : extents) m *= e;
        std::vector<double> out(static_cast<size_t>(m) * d);
        size_t o = 0;
        for (int p = 0; p < m; ++p) {
            int rem = p;
            std::vector<double> x(static_cast<size_t>(d));
            for (int a = d - 1; a >= 0; --a) {
                const int e = extents[static_cast<size_t>(a)];
                x[static_cast<size_t>(a)] = (rem % e + 0.5) / double(e);
                rem /= e;
            }
            for (int a = 0; a < d; ++a) out[o++] = x[static_cast<size_t>(a)];
        }
        return out;
    }
};

}  // namespace pdegen::geo
