// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "pdegen/core/ops_matmul.hpp"

namespace pdegen::core {

using Axes3 = std::array<int64_t, 3>;

namespace detail {

// Shared addressing for im2col/col2im: grid_idx = pos*stride - pad + k along
// each spatial axis. `pos` dims index the column axis, `grid` dims the array
// being gathered from (conv input) or scattered into (conv-transpose output).
struct ConvGeom {
    Axes3 grid{1, 1, 1};
    Axes3 pos{1, 1, 1};
    Axes3 k{1, 1, 1};
    Axes3 stride{1, 1, 1};
    Axes3 pad{0, 0, 0};

    int64_t kelems() const { return k[0] * k[1] * k[2]; }
    int64_t positions() const { return pos[0] * pos[1] * pos[2]; }
    int64_t grid_elems() const { return grid[0] * grid[1] * grid[2]; }
};

// cols[(c*kelems + kidx), pos] = grid[c, pos*s - p + k] (0 outside)
template <class T>
void gather_cols(const T* grid, int64_t channels, const ConvGeom& g, T* cols) {
    const int64_t P = g.positions();
    const int64_t ge = g.grid_elems();
    for (int64_t c = 0; c < channels; ++c) {
        const T* gc = grid + c * ge;
        for (int64_t k0 = 0; k0 < g.k[0]; ++k0)
            for (int64_t k1 = 0; k1 < g.k[1]; ++k1)
                for (int64_t k2 = 0; k2 < g.k[2]; ++k2) {
                    T* row = cols + (((c * g.k[0] + k0) * g.k[1] + k1) * g.k[2] + k2) * P;
                    for (int64_t p0 = 0; p0 < g.pos[0]; ++p0) {
                        const int64_t i0 = p0 * g.stride[0] - g.pad[0] + k0;
                        const bool ok0 = i0 >= 0 && i0 < g.grid[0];
                        for (int64_t p1 = 0; p1 < g.pos[1]; ++p1) {
                            const int64_t i1 = p1 * g.stride[1] - g.pad[1] + k1;
                            const bool ok01 = ok0 && i1 >= 0 && i1 < g.grid[1];
                            T* dst = row + (p0 * g.pos[1] + p1) * g.pos[2];
                            if (!ok01) {
                                for (int64_t p2 = 0; p2 < g.pos[2]; ++p2) dst[p2] = T(0);
                                continue;
                            }
                            const T* src = gc + (i0 * g.grid[1] + i1) * g.grid[2];
                            for (int64_t p2 = 0; p2 < g.pos[2]; ++p2) {
                                const int64_t i2 = p2 * g.stride[2] - g.pad[2] + k2;
                                dst[p2] = (i2 >= 0 && i2 < g.grid[2]) ? src[i2] : T(0);
                            }
                        }
                    }
                }
    }
}

// grid[c, pos*s - p + k] += cols[(c*kelems + kidx), pos]
template <class T>
void scatter_cols(const T* cols, int64_t channels, const ConvGeom& g, T* grid) {
    const int64_t P = g.positions();
    const int64_t ge = g.grid_elems();
    for (int64_t c = 0; c < channels; ++c) {
        T* gc = grid + c * ge;
        for (int64_t k0 = 0; k0 < g.k[0]; ++k0)
            for (int64_t k1 = 0; k1 < g.k[1]; ++k1)
                for (int64_t k2 = 0; k2 < g.k[2]; ++k2) {
                    const T* row = cols + (((c * g.k[0] + k0) * g.k[1] + k1) * g.k[2] + k2) * P;
                    for (int64_t p0 = 0; p0 < g.pos[0]; ++p0) {
                        const int64_t i0 = p0 * g.stride[0] - g.pad[0] + k0;
                        if (i0 < 0 || i0 >= g.grid[0]) continue;
                        for (int64_t p1 = 0; p1 < g.pos[1]; ++p1) {
                            const int64_t i1 = p1 * g.stride[1] - g.pad[1] + k1;
                            if (i1 < 0 || i1 >= g.grid[1]) continue;
                            const T* src = row + (p0 * g.pos[1] + p1) * g.pos[2];
                            T* dst = gc + (i0 * g.grid[1] + i1) * g.grid[2];
                            for (int64_t p2 = 0; p2 < g.pos[2]; ++p2) {
                                const int64_t i2 = p2 * g.stride[2] - g.pad[2] + k2;
                                if (i2 >= 0 && i2 < g.grid[2]) dst[i2] += src[p2];
                            }
                        }
                    }
                }
    }
}

inline void check_conv_attrs(const Axes3& stride, const Axes3& pad) {
    for (int i = 0; i < 3; ++i) {
        if (stride[i] <= 0) throw UsageError("conv: stride must be positive");
        if (pad[i] < 0) throw UsageError("conv: negative padding");
    }
}

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    const int64_t out = (in + 2 * pad - k) / stride + 1;
    if (out <= 0) throw UsageError("conv: kernel does not fit input extent " + std::to_string(in));
    return out;
}

}  // namespace detail

// x [N,C,D,H,W], w [O,C,kd,kh,kw], optional bias [O].
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 Axes3 stride, Axes3 pad) {
    detail::check_conv_attrs(stride, pad);
    if (x.dim() != 5 || w.dim() != 5)
        throw UsageError("conv3d: x must be [N,C,D,H,W], w [O,C,kd,kh,kw]");
    const int64_t N = x.size(0), C = x.size(1);
    if (w.size(1) != C)
        throw UsageError("conv3d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const int64_t O = w.size(0);
    detail::ConvGeom g;
    g.grid = {x.size(2), x.size(3), x.size(4)};
    g.k = {w.size(2), w.size(3), w.size(4)};
    g.stride = stride;
    g.pad = pad;
    for (int i = 0; i < 3; ++i) g.pos[i] = detail::conv_out_extent(g.grid[i], g.k[i], stride[i], pad[i]);
    const int64_t P = g.positions(), CK = C * g.kelems();

    std::vector<T> v(static_cast<size_t>(N * O * P), T(0));
    {
        std::vector<T> cols(static_cast<size_t>(CK * P));
        for (int64_t s = 0; s < N; ++s) {
            detail::gather_cols(x.data().data() + s * C * g.grid_elems(), C, g, cols.data());
            detail::gemm_acc(w.data().data(), cols.data(), v.data() + s * O * P, O, CK, P);
        }
    }
    if (bias.defined()) {
        if (bias.numel() != O) throw UsageError("conv3d: bias size mismatch");
        for (int64_t s = 0; s < N; ++s)
            for (int64_t o = 0; o < O; ++o) {
                const T b = bias.data()[static_cast<size_t>(o)];
                T* row = v.data() + (s * O + o) * P;
                for (int64_t p = 0; p < P; ++p) row[p] += b;
            }
    }

    Shape out_shape{N, O, g.pos[0], g.pos[1], g.pos[2]};
    const bool has_bias = bias.defined();
    auto bwd = [N, C, O, P, CK, g, has_bias](Node<T>& nd) {
        const auto& xv = nd.inputs[0]->value;
        const auto& wv = nd.inputs[1]->value;
        const bool need_x = nd.inputs[0]->requires_grad;
        const bool need_w = nd.inputs[1]->requires_grad;
        std::vector<T> cols, gw, gx, dcols;
        if (need_w) {
            cols.resize(static_cast<size_t>(CK * P));
            gw.assign(static_cast<size_t>(O * CK), T(0));
        }
        if (need_x) {
            gx.assign(xv.size(), T(0));
            dcols.resize(static_cast<size_t>(CK * P));
        }
        for (int64_t s = 0; s < N; ++s) {
            const T* gout = nd.grad.data() + s * O * P;
            if (need_w) {
                detail::gather_cols(xv.data() + s * C * g.grid_elems(), C, g, cols.data());
                detail::gemm_bt_acc(gout, cols.data(), gw.data(), O, P, CK);
            }
            if (need_x) {
                std::fill(dcols.begin(), dcols.end(), T(0));
                detail::gemm_at_acc(wv.data(), gout, dcols.data(), O, CK, P);
                detail::scatter_cols(dcols.data(), C, g, gx.data() + s * C * g.grid_elems());
            }
        }
        if (need_x) accumulate_grad(nd, 0, gx);
        if (need_w) accumulate_grad(nd, 1, gw);
        if (has_bias && nd.inputs[2]->requires_grad) {
            std::vector<T> gb(static_cast<size_t>(O), T(0));
            for (int64_t s = 0; s < N; ++s)
                for (int64_t o = 0; o < O; ++o) {
                    const T* row = nd.grad.data() + (s * O + o) * P;
                    T acc = 0;
                    for (int64_t p = 0; p < P; ++p) acc += row[p];
                    gb[static_cast<size_t>(o)] += acc;
                }
            accumulate_grad(nd, 2, gb);
        }
    };
    if (has_bias) return make_op<T>("conv3d", out_shape, std::move(v), {x, w, bias}, bwd);
    return make_op<T>("conv3d", out_shape, std::move(v), {x, w}, bwd);
}

template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t stride, int64_t pad) {
    return conv3d(x, w, bias, Axes3{stride, stride, stride}, Axes3{pad, pad, pad});
}

// x [N,C,H,W] routed through the rank-3 kernel with a unit depth axis.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t stride, int64_t pad) {
    if (x.dim() != 4 || w.dim() != 4)
        throw UsageError("conv2d: x must be [N,C,H,W], w [O,C,kh,kw]");
    Tensor<T> x5 = reshape(x, {x.size(0), x.size(1), 1, x.size(2), x.size(3)});
    Tensor<T> w5 = reshape(w, {w.size(0), w.size(1), 1, w.size(2), w.size(3)});
    Tensor<T> y = conv3d(x5, w5, bias, Axes3{1, stride, stride}, Axes3{0, pad, pad});
    return reshape(y, {y.size(0), y.size(1), y.size(3), y.size(4)});
}

// Transposed conv, x [N,C,D,H,W], w [C,O,kd,kh,kw]; out = (in-1)*s - 2p + k.
template <class T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           Axes3 stride, Axes3 pad) {
    detail::check_conv_attrs(stride, pad);
    if (x.dim() != 5 || w.dim() != 5)
        throw UsageError("conv_transpose3d: x must be [N,C,D,H,W], w [C,O,kd,kh,kw]");
    const int64_t N = x.size(0), C = x.size(1);
    if (w.size(0) != C)
        throw UsageError("conv_transpose3d: channel mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(w.shape()));
    const int64_t O = w.size(1);
    detail::ConvGeom g;
    g.pos = {x.size(2), x.size(3), x.size(4)};
    g.k = {w.size(2), w.size(3), w.size(4)};
    g.stride = stride;
    g.pad = pad;
    for (int i = 0; i < 3; ++i) {
        g.grid[i] = (g.pos[i] - 1) * stride[i] - 2 * pad[i] + g.k[i];
        if (g.grid[i] <= 0) throw UsageError("conv_transpose3d: non-positive output extent");
    }
    const int64_t P = g.positions(), OK = O * g.kelems(), GE = g.grid_elems();

    std::vector<T> v(static_cast<size_t>(N * O * GE), T(0));
    {
        std::vector<T> cols(static_cast<size_t>(OK * P));
        for (int64_t s = 0; s < N; ++s) {
            std::fill(cols.begin(), cols.end(), T(0));
            // cols[OK,P] = w^T[OK,C] * x[C,P]
            detail::gemm_at_acc(w.data().data(), x.data().data() + s * C * P, cols.data(), C, OK, P);
            detail::scatter_cols(cols.data(), O, g, v.data() + s * O * GE);
        }
    }
    if (bias.defined()) {
        if (bias.numel() != O) throw UsageError("conv_transpose3d: bias size mismatch");
        for (int64_t s = 0; s < N; ++s)
            for (int64_t o = 0; o < O; ++o) {
                const T b = bias.data()[static_cast<size_t>(o)];
                T* row = v.data() + (s * O + o) * GE;
                for (int64_t p = 0; p < GE; ++p) row[p] += b;
            }
    }

    Shape out_shape{N, O, g.grid[0], g.grid[1], g.grid[2]};
    const bool has_bias = bias.defined();
    auto bwd = [N, C, O, P, OK, GE, g, has_bias](Node<T>& nd) {
        const auto& xv = nd.inputs[0]->value;
        const auto& wv = nd.inputs[1]->value;
        const bool need_x = nd.inputs[0]->requires_grad;
        const bool need_w = nd.inputs[1]->requires_grad;
        std::vector<T> dcols(static_cast<size_t>(OK * P));
        std::vector<T> gx, gw;
        if (need_x) gx.assign(xv.size(), T(0));
        if (need_w) gw.assign(wv.size(), T(0));
        for (int64_t s = 0; s < N; ++s) {
            // dcols[(o,k), p] = gout[o, p*s - pad + k]
            detail::gather_cols(nd.grad.data() + s * O * GE, O, g, dcols.data());
            if (need_x)
                detail::gemm_acc(wv.data(), dcols.data(), gx.data() + s * C * P, C, OK, P);
            if (need_w)
                detail::gemm_bt_acc(xv.data() + s * C * P, dcols.data(), gw.data(), C, P, OK);
        }
        if (need_x) accumulate_grad(nd, 0, gx);
        if (need_w) accumulate_grad(nd, 1, gw);
        if (has_bias && nd.inputs[2]->requires_grad) {
            std::vector<T> gb(static_cast<size_t>(O), T(0));
            for (int64_t s = 0; s < N; ++s)
                for (int64_t o = 0; o < O; ++o) {
                    const T* row = nd.grad.data() + (s * O + o) * GE;
                    T acc = 0;
                    for (int64_t p = 0; p < GE; ++p) acc += row[p];
                    gb[static_cast<size_t>(o)] += acc;
                }
            accumulate_grad(nd, 2, gb);
        }
    };
    if (has_bias) return make_op<T>("conv_transpose3d", out_shape, std::move(v), {x, w, bias}, bwd);
    return make_op<T>("conv_transpose3d", out_shape, std::move(v), {x, w}, bwd);
}

template <class T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           int64_t stride, int64_t pad) {
    return conv_transpose3d(x, w, bias, Axes3{stride, stride, stride}, Axes3{pad, pad, pad});
}

template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           int64_t stride, int64_t pad) {
    if (x.dim() != 4 || w.dim() != 4)
        throw UsageError("conv_transpose2d: x must be [N,C,H,W], w [C,O,kh,kw]");
    Tensor<T> x5 = reshape(x, {x.size(0), x.size(1), 1, x.size(2), x.size(3)});
    Tensor<T> w5 = reshape(w, {w.size(0), w.size(1), 1, w.size(2), w.size(3)});
    Tensor<T> y = conv_transpose3d(x5, w5, bias, Axes3{1, stride, stride}, Axes3{0, pad, pad});
    return reshape(y, {y.size(0), y.size(1), y.size(3), y.size(4)});
}

}  // namespace pdegen::core
