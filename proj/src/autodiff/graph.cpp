#include "tomo/autodiff/graph.hpp"

namespace tomo::ad {

const Tensor& Var::value() const { return g_->value(*this); }

Graph::Node& Graph::node(const Var& v) {
    if (&v.graph() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
        throw std::logic_error("Var does not belong to this graph");
    }
    return nodes_[static_cast<std::size_t>(v.id())];
}

const Graph::Node& Graph::node(const Var& v) const { return const_cast<Graph*>(this)->node(v); }

Var Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    n.kind = Kind::constant;
    return push(std::move(n));
}

Var Graph::input(Tensor value) {
    Node n;
    n.op = "input";
    n.value = std::move(value);
    n.kind = Kind::input;
    n.requires_grad = track_;
    return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
    Node n;
    n.op = "param:" + p.name;
    n.value = p.value;
    n.kind = Kind::parameter;
    n.param = &p;
    n.requires_grad = track_ && p.trainable && !p.frozen;
    return push(std::move(n));
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
    if (!value.values().allFinite()) throw NonFiniteError("non-finite values produced by op '" + op + "'");
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    if (track_) {
        for (const Var& p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
        if (n.requires_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
}

Tensor& Graph::grad(const Var& v) {
    Node& n = node(v);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Graph::backward(const Var& root) {
    if (!track_) throw std::logic_error("backward on a graph built without gradient tracking");
    Node& r = node(root);
    if (r.value.size() != 1) throw std::invalid_argument("backward root must be a scalar, got " + to_string(r.value.shape()));
    if (!r.requires_grad) return;
    grad(root).values().setOnes();

    for (int i = root.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.kind == Kind::parameter) {
            Parameter& p = *n.param;
            if (p.grad.shape() != p.value.shape()) p.zero_grad();
            p.grad.values() += n.grad.values();
            continue;
        }
        if (n.kind != Kind::op) continue;
        if (!n.grad.values().allFinite()) throw NonFiniteError("non-finite gradient reaching op '" + n.op + "'");
        n.backward(*this, n.value, n.grad);
        n.backward = nullptr;
        if (i != root.id()) {
            n.grad.release();
            n.value.release();
        }
    }
}

}  // namespace tomo::ad
