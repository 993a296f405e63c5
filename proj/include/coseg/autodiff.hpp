#ifndef COSEG_AUTODIFF_HPP
#define COSEG_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "coseg/tensor.hpp"

namespace coseg {

// Reverse-mode tape. A Graph records one forward expression; backward()
// replays the tape once. Graphs are cheap, single-use and not thread-safe;
// concurrent evaluation uses one Graph per thread. Parameters live outside
// any graph as leaf nodes, so freezing a network is just clearing
// requires_grad on its leaves before the expression is built.

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // lazily allocated; empty means "no gradient reached this node"
    bool requires_grad = false;

    bool has_grad() const { return !grad.empty(); }

    // gradient buffer, allocating zeros on first touch
    Tensor<T>& g() {
        if (grad.empty()) grad = Tensor<T>::zeros(value.shape);
        return grad;
    }
    void clear_grad() { grad = Tensor<T>(); }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

// Detached copy: same values, no gradient history.
template <typename T>
NodePtr<T> detach(const NodePtr<T>& x) {
    return make_leaf<T>(x->value, false);
}

template <typename T>
class Graph {
public:
    // Creates the node for an op result. `diff` is true when some input
    // participates in backward; recording is skipped otherwise.
    NodePtr<T> result(Tensor<T> value, bool diff) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = diff && recording_;
        return n;
    }

    bool recording() const { return recording_; }

    void record(std::function<void()> op) { tape_.push_back(std::move(op)); }

    // Seeds d(root)/d(root) = 1 and replays the tape in reverse. Root must be
    // scalar. Gradients accumulate into every reachable node with
    // requires_grad set; leaves keep theirs for the optimizer to consume.
    void backward(const NodePtr<T>& root) {
        if (root->value.size() != 1) throw ShapeError("backward: root must be a scalar");
        root->g().v.setConstant(T(1));
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    void clear() { tape_.clear(); }
    size_t tape_size() const { return tape_.size(); }

private:
    friend class NoGradScope;
    std::vector<std::function<void()>> tape_;
    bool recording_ = true;
};

// RAII guard: ops executed inside compute values only (no tape entries, no
// requires_grad propagation). Used for fake-image generation in the D+S
// phase, validation and inference.
class NoGradScope {
public:
    template <typename T>
    explicit NoGradScope(Graph<T>& g) : flag_(&g.recording_), saved_(g.recording_) {
        *flag_ = false;
    }
    ~NoGradScope() { *flag_ = saved_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool* flag_;
    bool saved_;
};

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> add(Graph<T>& g, const NodePtr<T>& a, const NodePtr<T>& b) {
    require_same_shape(a->value, b->value, "add");
    auto out = g.result(Tensor<T>(a->value.shape, a->value.v + b->value.v), a->requires_grad || b->requires_grad);
    if (out->requires_grad) {
        bool da = a->requires_grad, db = b->requires_grad;
        g.record([=]() {
            if (!out->has_grad()) return;
            if (da) a->g().v += out->grad.v;
            if (db) b->g().v += out->grad.v;
        });
    }
    return out;
}

template <typename T>
NodePtr<T> scale(Graph<T>& g, const NodePtr<T>& x, T k) {
    auto out = g.result(Tensor<T>(x->value.shape, x->value.v * k), x->requires_grad);
    if (out->requires_grad) {
        g.record([=]() {
            if (!out->has_grad()) return;
            x->g().v += out->grad.v * k;
        });
    }
    return out;
}

template <typename T>
NodePtr<T> leaky_relu(Graph<T>& g, const NodePtr<T>& x, T slope) {
    Tensor<T> y(x->value.shape, (x->value.v > T(0)).select(x->value.v, x->value.v * slope));
    auto out = g.result(std::move(y), x->requires_grad);
    if (out->requires_grad) {
        g.record([=]() {
            if (!out->has_grad()) return;
            x->g().v += (x->value.v > T(0)).select(out->grad.v, out->grad.v * slope);
        });
    }
    return out;
}

template <typename T>
NodePtr<T> relu(Graph<T>& g, const NodePtr<T>& x) {
    return leaky_relu(g, x, T(0));
}

template <typename T>
NodePtr<T> tanh_op(Graph<T>& g, const NodePtr<T>& x) {
    Tensor<T> y(x->value.shape, x->value.v.tanh());
    auto out = g.result(std::move(y), x->requires_grad);
    if (out->requires_grad) {
        g.record([=]() {
            if (!out->has_grad()) return;
            x->g().v += out->grad.v * (T(1) - out->value.v.square());
        });
    }
    return out;
}

template <typename T>
NodePtr<T> sigmoid(Graph<T>& g, const NodePtr<T>& x) {
    Tensor<T> y(x->value.shape, T(1) / (T(1) + (-x->value.v).exp()));
    auto out = g.result(std::move(y), x->requires_grad);
    if (out->requires_grad) {
        g.record([=]() {
            if (!out->has_grad()) return;
            x->g().v += out->grad.v * out->value.v * (T(1) - out->value.v);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// scalar-valued reductions (loss primitives)
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> mean_abs_diff(Graph<T>& g, const NodePtr<T>& a, const NodePtr<T>& b) {
    require_same_shape(a->value, b->value, "mean_abs_diff");
    const T inv_n = T(1) / T(a->value.size());
    Tensor<T> out(Shape4{1, 1, 1, 1});
    out.v[0] = (a->value.v - b->value.v).abs().sum() * inv_n;
    auto node = g.result(std::move(out), a->requires_grad || b->requires_grad);
    if (node->requires_grad) {
        bool da = a->requires_grad, db = b->requires_grad;
        g.record([=]() {
            if (!node->has_grad()) return;
            const T gy = node->grad.v[0] * inv_n;
            ArrayX<T> s = (a->value.v - b->value.v).sign();
            if (da) a->g().v += s * gy;
            if (db) b->g().v -= s * gy;
        });
    }
    return node;
}

// mean((x - k)^2); the LSGAN building block
template <typename T>
NodePtr<T> mean_sq_diff(Graph<T>& g, const NodePtr<T>& x, T k) {
    const T inv_n = T(1) / T(x->value.size());
    Tensor<T> out(Shape4{1, 1, 1, 1});
    out.v[0] = (x->value.v - k).square().sum() * inv_n;
    auto node = g.result(std::move(out), x->requires_grad);
    if (node->requires_grad) {
        g.record([=]() {
            if (!node->has_grad()) return;
            x->g().v += (x->value.v - k) * (T(2) * inv_n * node->grad.v[0]);
        });
    }
    return node;
}

template <typename T>
T scalar_value(const NodePtr<T>& n) {
    if (n->value.size() != 1) throw ShapeError("scalar_value: not a scalar node");
    return n->value.v[0];
}

}  // namespace coseg

#endif
