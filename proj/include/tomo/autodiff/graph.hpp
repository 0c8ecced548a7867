#pragma once

#include "tomo/autodiff/tensor.hpp"

#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo::ad {

class Graph;

/// Raised when an operation produces NaN or infinity.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Handle to a node on a Graph tape.
class Var {
public:
    Var() = default;
    Var(Graph* g, int id) : g_(g), id_(id) {}

    Graph& graph() const { return *g_; }
    int id() const { return id_; }
    bool valid() const { return g_ != nullptr; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

private:
    Graph* g_ = nullptr;
    int id_ = -1;
};

/// Explicit reverse-mode tape. Nodes are appended in evaluation order, so
/// reverse insertion order is a valid topological order for backward.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, const Tensor& out_value, const Tensor& out_grad)>;

    explicit Graph(bool track_gradients = true) : track_(track_gradients) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool tracking() const { return track_; }

    Var constant(Tensor value);
    /// Leaf whose gradient is kept after backward.
    Var input(Tensor value);
    /// Leaf bound to a module parameter. Backward adds into p.grad unless the
    /// parameter is a buffer or frozen.
    Var parameter(Parameter& p);

    /// Appends an op result. `backward` is dropped when no parent needs a gradient.
    Var record(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward);

    const Tensor& value(const Var& v) const { return node(v).value; }
    bool requires_grad(const Var& v) const { return node(v).requires_grad; }
    /// Gradient accumulator of v, allocated as zeros on first use.
    Tensor& grad(const Var& v);

    /// Seeds d(root)/d(root) = 1 and propagates. Visits each node once.
    /// Intermediate values and gradients are released as the sweep passes them;
    /// the root, inputs and parameters keep theirs.
    void backward(const Var& root);

    std::size_t size() const { return nodes_.size(); }
    const std::string& op_name(const Var& v) const { return node(v).op; }

private:
    enum class Kind { op, constant, input, parameter };

    struct Node {
        std::string op;
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        Kind kind = Kind::op;
        bool requires_grad = false;
    };

    Node& node(const Var& v);
    const Node& node(const Var& v) const;
    Var push(Node n);

    std::deque<Node> nodes_;
    bool track_;
};

}  // namespace tomo::ad
