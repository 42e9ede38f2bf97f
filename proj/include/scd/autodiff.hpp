#pragma once

// Define-by-run reverse-mode differentiation over dense 64-bit tensors.
//
// A Graph owns every node created during one forward pass. Nodes are appended in
// creation order, which is a topological order, so backward() is a single reverse
// sweep. A Graph and its Vars belong to one thread.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scd/tensor.hpp"

namespace scd {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the Graph lives.
class Var {
  public:
    Var() = default;

    const Shape& shape() const;
    std::span<const double> value() const;
    std::span<const double> grad() const;
    bool requires_grad() const;
    std::size_t id() const noexcept { return id_; }
    Graph& graph() const { return *graph_; }
    bool valid() const noexcept { return graph_ != nullptr; }

    // Value of a single-element Var.
    double item() const;
    Tensor tensor() const;
    Tensor grad_tensor() const;

  private:
    friend class Graph;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

class Graph {
  public:
    // Called once per backward sweep with the id of the node being differentiated.
    // Reads grad(self) and accumulates into the grads of its inputs.
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Leaf that never receives gradient.
    Var constant(Tensor value);
    // Leaf whose gradient accumulates across backward() calls until zero_grad().
    Var parameter(Tensor value);

    // Appends a derived node. Fails with NumericError if `value` is not finite.
    Var record(std::string_view op, Shape shape, std::vector<double> value,
               const std::vector<Var>& inputs, BackwardFn backward);

    // Populates d(loss)/d(node) for every node that requires grad. Derived-node
    // grads are recomputed on each call; parameter grads accumulate.
    void backward(const Var& loss);
    void zero_grad();

    std::size_t size() const noexcept { return nodes_.size(); }

    const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
    std::span<const double> value(std::size_t id) const { return nodes_[id].value; }
    std::span<double> grad(std::size_t id) { return nodes_[id].grad; }
    std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::string_view op(std::size_t id) const { return nodes_[id].op; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  private:
    struct Node {
        std::string op;
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        bool is_leaf = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
};

// ---- operations ------------------------------------------------------------

// a[m x k] * b[k x n]
Var matmul(const Var& a, const Var& b);
// a[m x k] * b[n x k]^T
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);

// Row-wise softmax of scale * a over the last axis, stabilised by the row max.
Var softmax_rows(const Var& a, double scale);

// x[h x w x c_in] conv kernel[k x k x c_in x c_out] + bias[c_out]; k in {1, 3},
// stride 1, zero padding (k - 1) / 2.
Var conv2d(const Var& x, const Var& kernel, const Var& bias);

// x[h x w x c] -> [h*factor x w*factor x c], each cell copied into a factor^2 block.
Var upsample_nearest(const Var& x, std::size_t factor);

// Concatenation along the last axis, `a` first. Leading axes must agree.
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& a, std::size_t begin, std::size_t count);

Var reshape(const Var& a, Shape shape);

enum class Elementwise { Add, Sub, Mul, Scale };

// Pointwise on equal shapes. Scale is only meaningful with a scalar operand.
Var elementwise(Elementwise kind, const Var& a, const Var& b);
Var elementwise(Elementwise kind, const Var& a, double b);

inline Var add(const Var& a, const Var& b) { return elementwise(Elementwise::Add, a, b); }
inline Var sub(const Var& a, const Var& b) { return elementwise(Elementwise::Sub, a, b); }
inline Var mul(const Var& a, const Var& b) { return elementwise(Elementwise::Mul, a, b); }
inline Var scale(const Var& a, double s) { return elementwise(Elementwise::Scale, a, s); }

Var sum(const Var& a);

// max(a, 0); the derivative at 0 is taken as 0.
Var relu(const Var& a);

}  // namespace scd
