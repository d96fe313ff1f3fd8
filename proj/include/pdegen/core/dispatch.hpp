// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <variant>

#include "pdegen/core/ops_attention.hpp"
#include "pdegen/core/ops_conv.hpp"

namespace pdegen::core {

// Uniform entry point over the op vocabulary, mainly for sweep-style testing
// and introspection; library code calls the typed functions directly.
enum class OpKind {
    Add, Sub, Mul, Div, Neg, Exp, Log, Sqrt, Abs, Square, Clamp,
    Silu, Gelu, Sigmoid, Tanh,
    MatMul, Bmm,
    Conv2d, Conv3d, ConvTranspose2d, ConvTranspose3d,
    Sum, Mean, SumAxis, MeanAxis, Softmax, LayerNorm, GroupNorm,
    Embedding, Reshape, Transpose, Concat, Slice, Attention,
};

inline const std::vector<std::pair<OpKind, const char*>>& op_kind_table() {
    static const std::vector<std::pair<OpKind, const char*>> table = {
        {OpKind::Add, "add"}, {OpKind::Sub, "sub"}, {OpKind::Mul, "mul"}, {OpKind::Div, "div"},
        {OpKind::Neg, "neg"}, {OpKind::Exp, "exp"}, {OpKind::Log, "log"}, {OpKind::Sqrt, "sqrt"},
        {OpKind::Abs, "abs"}, {OpKind::Square, "square"}, {OpKind::Clamp, "clamp"},
        {OpKind::Silu, "silu"}, {OpKind::Gelu, "gelu"}, {OpKind::Sigmoid, "sigmoid"},
        {OpKind::Tanh, "tanh"}, {OpKind::MatMul, "matmul"}, {OpKind::Bmm, "bmm"},
        {OpKind::Conv2d, "conv2d"}, {OpKind::Conv3d, "conv3d"},
        {OpKind::ConvTranspose2d, "conv_transpose2d"}, {OpKind::ConvTranspose3d, "conv_transpose3d"},
        {OpKind::Sum, "sum"}, {OpKind::Mean, "mean"}, {OpKind::SumAxis, "sum_axis"},
        {OpKind::MeanAxis, "mean_axis"}, {OpKind::Softmax, "softmax"},
        {OpKind::LayerNorm, "layer_norm"}, {OpKind::GroupNorm, "group_norm"},
        {OpKind::Embedding, "embedding"}, {OpKind::Reshape, "reshape"},
        {OpKind::Transpose, "transpose"}, {OpKind::Concat, "concat"}, {OpKind::Slice, "slice"},
        {OpKind::Attention, "attention"},
    };
    return table;
}

inline const char* op_kind_name(OpKind k) {
    for (const auto& [kind, name] : op_kind_table())
        if (kind == k) return name;
    throw UsageError("unknown op-kind id");
}

inline OpKind op_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : op_kind_table())
        if (s == name) return kind;
    throw UsageError("unknown op-kind '" + s + "'");
}

struct Attrs {
    using Value = std::variant<int64_t, double, std::vector<int64_t>>;
    std::map<std::string, Value> kv;

    Attrs() = default;
    Attrs& set(const std::string& k, int64_t v) { kv[k] = v; return *this; }
    Attrs& set(const std::string& k, double v) { kv[k] = v; return *this; }
    Attrs& set(const std::string& k, std::vector<int64_t> v) { kv[k] = std::move(v); return *this; }

    int64_t geti(const std::string& k, int64_t dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        if (!std::holds_alternative<int64_t>(it->second)) throw UsageError("attribute '" + k + "' is not an int");
        return std::get<int64_t>(it->second);
    }
    double getd(const std::string& k, double dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        if (std::holds_alternative<int64_t>(it->second)) return double(std::get<int64_t>(it->second));
        if (!std::holds_alternative<double>(it->second)) throw UsageError("attribute '" + k + "' is not a real");
        return std::get<double>(it->second);
    }
    std::vector<int64_t> getv(const std::string& k, std::vector<int64_t> dflt = {}) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        if (!std::holds_alternative<std::vector<int64_t>>(it->second))
            throw UsageError("attribute '" + k + "' is not an int list");
        return std::get<std::vector<int64_t>>(it->second);
    }
};

template <class T>
Tensor<T> forward_op(OpKind kind, const std::vector<Tensor<T>>& in, const Attrs& a = {}) {
    auto need = [&](size_t n) {
        if (in.size() != n)
            throw UsageError(std::string("op ") + op_kind_name(kind) + ": expected " +
                             std::to_string(n) + " inputs, got " + std::to_string(in.size()));
    };
    switch (kind) {
        case OpKind::Add: need(2); return add(in[0], in[1]);
        case OpKind::Sub: need(2); return sub(in[0], in[1]);
        case OpKind::Mul: need(2); return mul(in[0], in[1]);
        case OpKind::Div: need(2); return div(in[0], in[1]);
        case OpKind::Neg: need(1); return neg(in[0]);
        case OpKind::Exp: need(1); return exp(in[0]);
        case OpKind::Log: need(1); return log(in[0]);
        case OpKind::Sqrt: need(1); return sqrt(in[0]);
        case OpKind::Abs: need(1); return abs(in[0]);
        case OpKind::Square: need(1); return square(in[0]);
        case OpKind::Clamp:
            need(1);
            return clamp(in[0], T(a.getd("lo", -1.0)), T(a.getd("hi", 1.0)));
        case OpKind::Silu: need(1); return silu(in[0]);
        case OpKind::Gelu: need(1); return gelu(in[0]);
        case OpKind::Sigmoid: need(1); return sigmoid(in[0]);
        case OpKind::Tanh: need(1); return tanh(in[0]);
        case OpKind::MatMul: need(2); return matmul(in[0], in[1]);
        case OpKind::Bmm: need(2); return bmm(in[0], in[1]);
        case OpKind::Conv2d:
            return conv2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>(), a.geti("stride", 1),
                          a.geti("pad", 0));
        case OpKind::Conv3d:
            return conv3d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>(), a.geti("stride", 1),
                          a.geti("pad", 0));
        case OpKind::ConvTranspose2d:
            return conv_transpose2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>(),
                                    a.geti("stride", 1), a.geti("pad", 0));
        case OpKind::ConvTranspose3d:
            return conv_transpose3d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>(),
                                    a.geti("stride", 1), a.geti("pad", 0));
        case OpKind::Sum: need(1); return sum(in[0]);
        case OpKind::Mean: need(1); return mean(in[0]);
        case OpKind::SumAxis: need(1); return sum_axis(in[0], a.geti("axis", -1), a.geti("keepdim", 0) != 0);
        case OpKind::MeanAxis: need(1); return mean_axis(in[0], a.geti("axis", -1), a.geti("keepdim", 0) != 0);
        case OpKind::Softmax: need(1); return softmax(in[0]);
        case OpKind::LayerNorm:
            if (in.size() == 3) return layer_norm(in[0], in[1], in[2]);
            need(1);
            return layer_norm(in[0]);
        case OpKind::GroupNorm:
            if (in.size() == 3) return group_norm(in[0], a.geti("groups", 1), in[1], in[2]);
            need(1);
            return group_norm(in[0], a.geti("groups", 1));
        case OpKind::Embedding: need(1); return embedding(in[0], a.getv("ids"));
        case OpKind::Reshape: need(1); return reshape(in[0], a.getv("shape"));
        case OpKind::Transpose: need(1); return transpose(in[0], a.getv("perm"));
        case OpKind::Concat: return concat(in, a.geti("axis", 0));
        case OpKind::Slice:
            need(1);
            return slice(in[0], a.geti("axis", 0), a.geti("start", 0), a.geti("len", 1));
        case OpKind::Attention:
            if (in.size() == 4) return scaled_dot_product_attention(in[0], in[1], in[2], in[3]);
            need(3);
            return scaled_dot_product_attention(in[0], in[1], in[2]);
    }
    throw UsageError("unknown op-kind id");
}

}  // namespace pdegen::core
