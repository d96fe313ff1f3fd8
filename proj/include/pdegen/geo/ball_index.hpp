// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::geo {

// Fixed-radius neighbor lists from a uniform spatial hash over [0,1]^dim.
// Neighbor indices per query are ordered by source coordinates
// (lexicographic, index tiebreak) so accumulation order does not depend on
// the input ordering of the source cloud.
struct BallIndex {
    int dim = 0;
    double radius = 0.0;
    int64_t source_count = 0;
    std::vector<int64_t> offsets;  // CSR, size Q+1
    std::vector<int64_t> indices;  // source ids, coordinate-sorted per query
    int64_t zero_neighbor_queries = 0;

    int64_t query_count() const { return static_cast<int64_t>(offsets.size()) - 1; }
    int64_t pair_count() const { return static_cast<int64_t>(indices.size()); }
    int64_t count(int64_t q) const { return offsets[static_cast<size_t>(q + 1)] - offsets[static_cast<size_t>(q)]; }
};

// Volume of the dim-ball of radius r.
inline double ball_volume(int dim, double r) {
    const double v = std::pow(3.14159265358979323846, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
    return v * std::pow(r, dim);
}

inline BallIndex build_ball_index(const std::vector<double>& sources, const std::vector<double>& queries,
                                  int dim, double r) {
    if (r <= 0) throw UsageError("ball index: radius must be positive");
    if (dim <= 0) throw UsageError("ball index: non-positive dimension");
    if (sources.empty()) throw DataError("ball index: empty source set");
    if (sources.size() % static_cast<size_t>(dim) != 0 || queries.size() % static_cast<size_t>(dim) != 0)
        throw UsageError("ball index: coordinate array length not divisible by dim");
    const int64_t S = static_cast<int64_t>(sources.size()) / dim;
    const int64_t Q = static_cast<int64_t>(queries.size()) / dim;

    // cell edge >= r so neighbors live in the 3^dim surrounding cells
    const double cell = std::max(r, 1e-9);
    const int64_t cells_per_axis = static_cast<int64_t>(std::floor(1.0 / cell)) + 1;
    auto cell_of = [&](const double* p) {
        int64_t key = 0;
        for (int d = 0; d < dim; ++d) {
            int64_t c = static_cast<int64_t>(std::floor(p[d] / cell));
            c = std::min(std::max<int64_t>(c, 0), cells_per_axis - 1);
            key = key * cells_per_axis + c;
        }
        return key;
    };

    std::unordered_map<int64_t, std::vector<int64_t>> buckets;
    buckets.reserve(static_cast<size_t>(S));
    for (int64_t s = 0; s < S; ++s) buckets[cell_of(&sources[static_cast<size_t>(s * dim)])].push_back(s);

    BallIndex out;
    out.dim = dim;
    out.radius = r;
    out.source_count = S;
    out.offsets.assign(static_cast<size_t>(Q) + 1, 0);
    const double r2 = r * r;

    std::vector<int64_t> hits;
    std::vector<int64_t> cell_idx(static_cast<size_t>(dim));
    std::vector<std::pair<std::vector<double>, int64_t>> ordered;
    for (int64_t q = 0; q < Q; ++q) {
        const double* qp = &queries[static_cast<size_t>(q * dim)];
        hits.clear();
        for (int d = 0; d < dim; ++d) {
            int64_t c = static_cast<int64_t>(std::floor(qp[d] / cell));
            cell_idx[static_cast<size_t>(d)] = std::min(std::max<int64_t>(c, 0), cells_per_axis - 1);
        }
        // walk the 3^dim neighborhood
        std::vector<int64_t> delta(static_cast<size_t>(dim), -1);
        while (true) {
            int64_t key = 0;
            bool valid = true;
            for (int d = 0; d < dim; ++d) {
                const int64_t c = cell_idx[static_cast<size_t>(d)] + delta[static_cast<size_t>(d)];
                if (c < 0 || c >= cells_per_axis) {
                    valid = false;
                    break;
                }
                key = key * cells_per_axis + c;
            }
            if (valid) {
                auto it = buckets.find(key);
                if (it != buckets.end()) {
                    for (int64_t s : it->second) {
                        const double* sp = &sources[static_cast<size_t>(s * dim)];
                        double d2 = 0;
                        for (int d = 0; d < dim; ++d) {
                            const double dd = sp[d] - qp[d];
                            d2 += dd * dd;
                        }
                        if (d2 <= r2) hits.push_back(s);
                    }
                }
            }
            int d = dim - 1;
            while (d >= 0 && delta[static_cast<size_t>(d)] == 1) delta[static_cast<size_t>(d--)] = -1;
            if (d < 0) break;
            delta[static_cast<size_t>(d)]++;
        }
        // coordinate order, index tiebreak
        ordered.clear();
        for (int64_t s : hits) {
            std::vector<double> key(sources.begin() + s * dim, sources.begin() + (s + 1) * dim);
            ordered.emplace_back(std::move(key), s);
        }
        std::sort(ordered.begin(), ordered.end());
        for (auto& [k, s] : ordered) out.indices.push_back(s);
        out.offsets[static_cast<size_t>(q + 1)] = static_cast<int64_t>(out.indices.size());
        if (hits.empty()) out.zero_neighbor_queries++;
    }
    return out;
}

enum class WeightMode {
    EqualShare,       // mu = vol(B_r)/M_b per in-ball point
    InverseDensity,   // mu = vol(B_r)/count_r(source): noisy local-volume estimate
};

// Riemann/Monte Carlo quadrature weights, one per (query, source) pair in
// index order. Zero-neighbor queries contribute no pairs.
inline std::vector<double> riemann_weights(const BallIndex& index, WeightMode mode,
                                           const std::vector<double>& sources = {}) {
    const double vol = ball_volume(index.dim, index.radius);
    std::vector<double> mu(static_cast<size_t>(index.pair_count()));
    if (mode == WeightMode::EqualShare) {
        for (int64_t q = 0; q < index.query_count(); ++q) {
            const int64_t cnt = index.count(q);
            for (int64_t p = index.offsets[static_cast<size_t>(q)]; p < index.offsets[static_cast<size_t>(q + 1)]; ++p)
                mu[static_cast<size_t>(p)] = vol / double(cnt);
        }
        return mu;
    }
    if (sources.empty())
        throw UsageError("riemann weights: inverse-density mode needs the source coordinates");
    // per-source neighbor counts; a source always counts itself
    BallIndex self = build_ball_index(sources, sources, index.dim, index.radius);
    std::vector<int64_t> counts(static_cast<size_t>(self.query_count()));
    for (int64_t s = 0; s < self.query_count(); ++s) counts[static_cast<size_t>(s)] = self.count(s);
    for (int64_t p = 0; p < index.pair_count(); ++p)
        mu[static_cast<size_t>(p)] = vol / double(counts[static_cast<size_t>(index.indices[static_cast<size_t>(p)])]);
    return mu;
}

}  // namespace pdegen::geo
