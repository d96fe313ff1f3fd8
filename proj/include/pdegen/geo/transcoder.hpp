// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>

#include "pdegen/geo/ball_index.hpp"
#include "pdegen/geo/field_sample.hpp"
#include "pdegen/geo/kernel_net.hpp"

namespace pdegen::geo {

enum class KernelMode {
    Learned,             // kappa = mlp(pair)/vol(B_r)
    Identity,            // kappa = 1 (raw Monte Carlo sum)
    NormalizedIdentity,  // kappa = 1, result divided by per-query sum of mu
};

// Flat pairing between a query cloud and a source cloud; shared by forward
// and backward passes (and across a batch), so it lives behind a shared_ptr.
struct PairTable {
    int64_t query_count = 0;
    int64_t source_count = 0;
    std::vector<int64_t> src;       // per pair
    std::vector<int64_t> query;     // per pair
    std::vector<double> mu;         // per pair
    std::vector<double> mu_sum;     // per query

    int64_t pairs() const { return static_cast<int64_t>(src.size()); }
};

// Precomputed aggregation plan: neighbor pairs, quadrature weights and the
// kernel-net input features. Depends only on geometry; reuse across steps.
template <class T>
struct BallPlan {
    std::shared_ptr<const PairTable> table;
    core::Tensor<T> pair_features;  // [P, 2*dim], constant
    double vol = 0.0;
    int64_t zero_neighbor_queries = 0;  // before any fallback splicing
    int64_t fallback_pairs = 0;

    int64_t queries() const { return table->query_count; }
    int64_t pairs() const { return table->pairs(); }
};

template <class T>
BallPlan<T> build_ball_plan(const std::vector<double>& sources, const std::vector<double>& queries,
                            int dim, double r, WeightMode wmode, bool nearest_fallback = false) {
    BallIndex index = build_ball_index(sources, queries, dim, r);
    std::vector<double> mu = riemann_weights(index, wmode, sources);

    BallPlan<T> plan;
    plan.vol = ball_volume(dim, r);
    plan.zero_neighbor_queries = index.zero_neighbor_queries;

    auto table = std::make_shared<PairTable>();
    table->query_count = index.query_count();
    table->source_count = index.source_count;

    const int64_t S = static_cast<int64_t>(sources.size()) / dim;
    for (int64_t q = 0; q < index.query_count(); ++q) {
        const int64_t beg = index.offsets[static_cast<size_t>(q)], end = index.offsets[static_cast<size_t>(q + 1)];
        if (beg == end && nearest_fallback) {
            const double* qp = &queries[static_cast<size_t>(q * dim)];
            int64_t best = 0;
            double best_d2 = 1e300;
            for (int64_t s = 0; s < S; ++s) {
                double d2 = 0;
                for (int d = 0; d < dim; ++d) {
                    const double dd = sources[static_cast<size_t>(s * dim + d)] - qp[d];
                    d2 += dd * dd;
                }
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = s;
                }
            }
            table->src.push_back(best);
            table->query.push_back(q);
            table->mu.push_back(plan.vol);
            plan.fallback_pairs++;
            continue;
        }
        for (int64_t p = beg; p < end; ++p) {
            table->src.push_back(index.indices[static_cast<size_t>(p)]);
            table->query.push_back(q);
            table->mu.push_back(mu[static_cast<size_t>(p)]);
        }
    }
    table->mu_sum.assign(static_cast<size_t>(table->query_count), 0.0);
    for (int64_t p = 0; p < table->pairs(); ++p)
        table->mu_sum[static_cast<size_t>(table->query[static_cast<size_t>(p)])] += table->mu[static_cast<size_t>(p)];

    const int64_t P = table->pairs();
    std::vector<T> feat(static_cast<size_t>(P) * 2 * dim);
    for (int64_t p = 0; p < P; ++p) {
        const int64_t q = table->query[static_cast<size_t>(p)];
        const int64_t s = table->src[static_cast<size_t>(p)];
        for (int d = 0; d < dim; ++d) {
            feat[static_cast<size_t>(p * 2 * dim + d)] = T(queries[static_cast<size_t>(q * dim + d)]);
            feat[static_cast<size_t>(p * 2 * dim + dim + d)] = T(sources[static_cast<size_t>(s * dim + d)]);
        }
    }
    plan.pair_features = core::Tensor<T>::from_data({P, 2 * dim}, std::move(feat));
    plan.table = std::move(table);
    return plan;
}

// out[q,:] = sum_p kappa[p] (*) u[src(p),:] * mu[p], optionally / sum_p mu[p].
// kappa may be [P,C] (diagonal gate), [P,C*C] (full matrix) or undefined
// (identity). Pairs are traversed in plan order, which is coordinate-sorted.
template <class T>
core::Tensor<T> ball_apply(const core::Tensor<T>& kappa, const core::Tensor<T>& u,
                           const BallPlan<T>& plan, bool normalize) {
    const int64_t C = u.size(1);
    const int64_t S = u.size(0);
    std::shared_ptr<const PairTable> tb = plan.table;
    const int64_t Q = tb->query_count;
    const int64_t P = tb->pairs();
    if (S != tb->source_count) throw UsageError("ball_apply: value rows do not match plan sources");
    const bool has_kappa = kappa.defined();
    const bool full = has_kappa && kappa.size(1) == C * C;
    if (has_kappa && kappa.size(0) != P)
        throw UsageError("ball_apply: kappa rows do not match plan pairs");
    if (has_kappa && !full && kappa.size(1) != C)
        throw UsageError("ball_apply: kappa columns must be C or C*C");

    std::vector<T> out(static_cast<size_t>(Q * C), T(0));
    const T* uv = u.data().data();
    const T* kv = has_kappa ? kappa.data().data() : nullptr;
    for (int64_t p = 0; p < P; ++p) {
        const int64_t q = tb->query[static_cast<size_t>(p)];
        const int64_t s = tb->src[static_cast<size_t>(p)];
        const T m = T(tb->mu[static_cast<size_t>(p)]);
        T* orow = out.data() + q * C;
        const T* urow = uv + s * C;
        if (!has_kappa) {
            for (int64_t c = 0; c < C; ++c) orow[c] += urow[c] * m;
        } else if (!full) {
            const T* krow = kv + p * C;
            for (int64_t c = 0; c < C; ++c) orow[c] += krow[c] * urow[c] * m;
        } else {
            const T* krow = kv + p * C * C;
            for (int64_t i = 0; i < C; ++i) {
                T acc = 0;
                for (int64_t j = 0; j < C; ++j) acc += krow[i * C + j] * urow[j];
                orow[i] += acc * m;
            }
        }
    }
    if (normalize) {
        for (int64_t q = 0; q < Q; ++q) {
            const double ms = tb->mu_sum[static_cast<size_t>(q)];
            if (ms > 0) {
                const T inv = T(1.0 / ms);
                for (int64_t c = 0; c < C; ++c) out[static_cast<size_t>(q * C + c)] *= inv;
            }
        }
    }

    auto bwd = [tb, C, S, P, full, has_kappa, normalize](core::Node<T>& nd) {
        const bool need_kappa = has_kappa && nd.inputs[0]->requires_grad;
        const size_t u_slot = has_kappa ? 1 : 0;
        const bool need_u = nd.inputs[u_slot]->requires_grad;
        const T* uv2 = nd.inputs[u_slot]->value.data();
        const T* kv2 = has_kappa ? nd.inputs[0]->value.data() : nullptr;
        std::vector<T> gk, gu;
        if (need_kappa) gk.assign(static_cast<size_t>(P * (full ? C * C : C)), T(0));
        if (need_u) gu.assign(static_cast<size_t>(S * C), T(0));
        std::vector<T> gout(nd.grad);
        if (normalize) {
            for (int64_t q = 0; q < tb->query_count; ++q) {
                const double ms = tb->mu_sum[static_cast<size_t>(q)];
                if (ms > 0) {
                    const T inv = T(1.0 / ms);
                    for (int64_t c = 0; c < C; ++c) gout[static_cast<size_t>(q * C + c)] *= inv;
                }
            }
        }
        for (int64_t p = 0; p < P; ++p) {
            const int64_t q = tb->query[static_cast<size_t>(p)];
            const int64_t s = tb->src[static_cast<size_t>(p)];
            const T m = T(tb->mu[static_cast<size_t>(p)]);
            const T* grow = gout.data() + q * C;
            const T* urow = uv2 + s * C;
            if (!has_kappa) {
                if (need_u) {
                    T* gur = gu.data() + s * C;
                    for (int64_t c = 0; c < C; ++c) gur[c] += grow[c] * m;
                }
            } else if (!full) {
                const T* krow = kv2 + p * C;
                if (need_kappa) {
                    T* gkr = gk.data() + p * C;
                    for (int64_t c = 0; c < C; ++c) gkr[c] += grow[c] * urow[c] * m;
                }
                if (need_u) {
                    T* gur = gu.data() + s * C;
                    for (int64_t c = 0; c < C; ++c) gur[c] += grow[c] * krow[c] * m;
                }
            } else {
                const T* krow = kv2 + p * C * C;
                if (need_kappa) {
                    T* gkr = gk.data() + p * C * C;
                    for (int64_t i = 0; i < C; ++i)
                        for (int64_t j = 0; j < C; ++j) gkr[i * C + j] += grow[i] * urow[j] * m;
                }
                if (need_u) {
                    T* gur = gu.data() + s * C;
                    for (int64_t i = 0; i < C; ++i)
                        for (int64_t j = 0; j < C; ++j) gur[j] += grow[i] * krow[i * C + j] * m;
                }
            }
        }
        if (need_kappa) core::accumulate_grad(nd, 0, gk);
        if (need_u) core::accumulate_grad(nd, u_slot, gu);
    };

    if (has_kappa)
        return core::make_op<T>("ball_apply", {Q, C}, std::move(out), {kappa, u}, bwd);
    return core::make_op<T>("ball_apply", {Q, C}, std::move(out), {u}, bwd);
}

// Mesh <-> uniform grid transcoding through truncated kernel integrals.
// Encode aggregates mesh samples onto latent grid cells; decode interpolates
// decoded grid values onto arbitrary query points. Encoder and decoder hold
// separate kernels.
template <class T>
class Transcoder {
public:
    Transcoder() = default;

    Transcoder(core::ParamRegistry<T>& reg, const std::string& prefix, int coord_dim, int channels,
               int hidden, int depth, bool full_matrix, WeightMode wmode = WeightMode::EqualShare)
        : encoder_(reg, prefix + ".enc", coord_dim, channels, hidden, depth, full_matrix),
          decoder_(reg, prefix + ".dec", coord_dim, channels, hidden, depth, full_matrix),
          wmode_(wmode) {}

    WeightMode weight_mode() const { return wmode_; }
    const KernelNet<T>& encoder_kernel() const { return encoder_; }
    const KernelNet<T>& decoder_kernel() const { return decoder_; }

    // Plan mapping a sample's space-time points onto the latent grid cells.
    // Uncovered latent cells are a hard error: training data must cover the grid.
    BallPlan<T> encode_plan(const FieldSample& sample, const LatentGridSpec& spec) const {
        spec.validate();
        auto plan = build_ball_plan<T>(sample.spacetime_coords(), spec.spacetime_coords(),
                                       1 + sample.spatial_dim, spec.radius, wmode_, false);
        if (plan.zero_neighbor_queries > 0) {
            std::ostringstream os;
            os << "kernel aggregation: " << plan.zero_neighbor_queries
               << " latent cell(s) have no source point within radius " << spec.radius
               << " (first empty cell " << first_empty_cell(plan, spec)
               << "); increase the ball radius or densify the input";
            throw DataError(os.str());
        }
        return plan;
    }

    // Plan mapping latent grid cells onto arbitrary space-time query points.
    BallPlan<T> decode_plan(const LatentGridSpec& spec, const std::vector<double>& query_coords,
                            bool nearest_fallback = false) const {
        spec.validate();
        const int dim = 1 + static_cast<int>(spec.extents.size());
        auto plan = build_ball_plan<T>(spec.spacetime_coords(), query_coords, dim, spec.radius,
                                       wmode_, nearest_fallback);
        if (!nearest_fallback && plan.zero_neighbor_queries > 0)
            throw DataError("kernel interpolation: " + std::to_string(plan.zero_neighbor_queries) +
                            " query point(s) have no latent cell within radius " +
                            std::to_string(spec.radius) + "; enable the nearest fallback or enlarge r");
        return plan;
    }

    // kappa tensor for a plan under the requested mode (undefined for the
    // identity modes; they bypass the network).
    core::Tensor<T> kappa(const BallPlan<T>& plan, KernelMode mode, bool decode_side) const {
        if (mode != KernelMode::Learned) return core::Tensor<T>();
        const auto& net = decode_side ? decoder_ : encoder_;
        return core::scale(net.forward(plan.pair_features), T(1.0 / plan.vol));
    }

    // values [S, C] -> aggregated [Q, C]
    core::Tensor<T> apply(const BallPlan<T>& plan, const core::Tensor<T>& kappa_t,
                          const core::Tensor<T>& values, KernelMode mode) const {
        return ball_apply(kappa_t, values, plan, mode == KernelMode::NormalizedIdentity);
    }

    // Full aggregate of one sample onto a latent grid, [T_l, extents..., C].
    core::Tensor<T> aggregate(const FieldSample& sample, const LatentGridSpec& spec,
                              KernelMode mode = KernelMode::Learned) const {
        auto plan = encode_plan(sample, spec);
        auto k = kappa(plan, mode, false);
        auto out = apply(plan, k, sample.values_tensor<T>(), mode);
        core::Shape s{spec.time_count};
        for (int e : spec.extents) s.push_back(e);
        s.push_back(sample.channels);
        return core::reshape(out, s);
    }

    // Interpolate latent grid values [T_l*M_l, C] at arbitrary query points.
    core::Tensor<T> interpolate(const core::Tensor<T>& grid_values, const LatentGridSpec& spec,
                                const std::vector<double>& query_coords,
                                KernelMode mode = KernelMode::Learned,
                                bool nearest_fallback = false) const {
        auto plan = decode_plan(spec, query_coords, nearest_fallback);
        auto k = kappa(plan, mode, true);
        return apply(plan, k, grid_values, mode);
    }

private:
    static std::string first_empty_cell(const BallPlan<T>& plan, const LatentGridSpec& spec) {
        const auto coords = spec.spacetime_coords();
        const int dim = 1 + static_cast<int>(spec.extents.size());
        std::vector<bool> covered(static_cast<size_t>(plan.queries()), false);
        for (int64_t p = 0; p < plan.pairs(); ++p)
            covered[static_cast<size_t>(plan.table->query[static_cast<size_t>(p)])] = true;
        for (int64_t q = 0; q < plan.queries(); ++q)
            if (!covered[static_cast<size_t>(q)]) {
                std::ostringstream os;
                os << "(";
                for (int d = 0; d < dim; ++d)
                    os << (d ? "," : "") << coords[static_cast<size_t>(q * dim + d)];
                os << ")";
                return os.str();
            }
        return "(none)";
    }

    KernelNet<T> encoder_;
    KernelNet<T> decoder_;
    WeightMode wmode_ = WeightMode::EqualShare;
};

}  // namespace pdegen::geo
