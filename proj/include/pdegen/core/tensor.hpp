// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::core {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Thread-local recording switch; forward values are identical either way,
// recording only attaches backward metadata.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // lazily allocated, same length as value
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;  // backward already ran through this node
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> inputs;
    std::function<void(Node<T>&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Reverse-mode autodiff tensor: a shared handle to a graph node. Dense
// row-major storage; scalar type T is float for training, double for
// gradient-check builds.
template <class T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(Shape shape, T v, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        n->value.assign(static_cast<size_t>(shape_numel(shape)), v);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad && grad_mode();
        return Tensor(std::move(n));
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw UsageError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad && grad_mode();
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t dim() const { return static_cast<int64_t>(n_->shape.size()); }
    int64_t size(int64_t axis) const {
        if (axis < 0) axis += dim();
        return n_->shape[static_cast<size_t>(axis)];
    }
    int64_t numel() const { return n_->numel(); }

    const std::vector<T>& data() const { return n_->value; }
    std::vector<T>& mut_data() { return n_->value; }
    const std::vector<T>& grad() const {
        if (n_->grad.empty()) throw UsageError("tensor has no gradient (op=" + std::string(n_->op) + ")");
        return n_->grad;
    }
    bool has_grad() const { return !n_->grad.empty(); }
    void zero_grad() { n_->grad.clear(); }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        n_->requires_grad = rg;
        return *this;
    }

    T item() const {
        if (numel() != 1) throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    // Detached copy sharing no graph history.
    Tensor detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = n_->shape;
        n->value = n_->value;
        return Tensor(std::move(n));
    }

    std::shared_ptr<Node<T>>& node() { return n_; }
    const std::shared_ptr<Node<T>>& node() const { return n_; }

    // Runs reverse-mode accumulation from this scalar. Each recorded graph
    // supports exactly one backward pass; rerunning without a fresh forward
    // throws.
    void backward() const {
        if (!defined()) throw UsageError("backward() on undefined tensor");
        if (numel() != 1) throw UsageError("backward() requires a scalar loss, got " + shape_str(shape()));
        if (!n_->requires_grad)
            throw UsageError("backward() on a tensor that does not require grad");

        std::vector<Node<T>*> order;
        topo_sort(order);
        for (Node<T>* nd : order) {
            if (nd->consumed)
                throw UsageError("second backward without a new forward (op=" + std::string(nd->op) + ")");
        }
        n_->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* nd = *it;
            if (nd->backward_fn && !nd->grad.empty()) nd->backward_fn(*nd);
            if (!nd->leaf) nd->consumed = true;
        }
    }

private:
    void topo_sort(std::vector<Node<T>*>& order) const {
        // Iterative DFS; order ends up topological (inputs before users).
        std::unordered_set<Node<T>*> visited;
        std::vector<std::pair<Node<T>*, size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        visited.insert(n_.get());
        while (!stack.empty()) {
            auto& [nd, next] = stack.back();
            if (next < nd->inputs.size()) {
                Node<T>* child = nd->inputs[next++].get();
                if (child->requires_grad && !visited.count(child)) {
                    visited.insert(child);
                    stack.emplace_back(child, 0);
                }
            } else {
                order.push_back(nd);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node<T>> n_;
};

// Builds an op node. `bwd` reads self.grad and accumulates into
// self.inputs[i]->grad (after ensure_grad). Inputs and the closure are only
// recorded when some input requires grad and recording is on.
template <class T>
Tensor<T> make_op(const char* name, Shape shape, std::vector<T> value,
                  std::initializer_list<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> bwd) {
    if (shape_numel(shape) != static_cast<int64_t>(value.size()))
        throw UsageError(std::string("op ") + name + ": value size does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = name;
    n->leaf = false;
    bool rg = false;
    for (const auto& in : inputs) rg = rg || in.requires_grad();
    if (rg && grad_mode()) {
        n->requires_grad = true;
        for (const auto& in : inputs) n->inputs.push_back(in.node());
        n->backward_fn = std::move(bwd);
    }
    return Tensor<T>(std::move(n));
}

template <class T>
void accumulate_grad(Node<T>& owner, size_t input_idx, const std::vector<T>& g) {
    auto& in = *owner.inputs[input_idx];
    if (!in.requires_grad) return;
    in.ensure_grad();
    const size_t n = g.size();
    T* dst = in.grad.data();
    const T* src = g.data();
    for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace pdegen::core
