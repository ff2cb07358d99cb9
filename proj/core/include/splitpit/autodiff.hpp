#pragma once

// Define-by-run reverse-mode automatic differentiation over dense
// row-major float64 tensors.
//
// A Tensor is an immutable value. When it was produced on a Tape it also
// carries a node id; ops whose inputs all lack a node run in value-only mode
// and record nothing. Supported ranks are 1 and 2, and the only implicit
// broadcasting is scalar (shape [1]) against a tensor.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace splitpit::ad {

using Shape = std::vector<std::size_t>;
using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return size() == 0; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> data() const;
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  /// Value of a single-element tensor.
  double item() const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }

  /// Same value, no tape node.
  Tensor detach() const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

/// Adds the output-gradient contribution into each input's gradient buffer.
/// in_grads[i] is null when input i carries no node.
using BackwardFn =
    std::function<void(std::span<const double> out_grad, std::span<double* const> in_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable leaf holding a copy of value's data.
  Tensor leaf(const Tensor& value);

  /// Appends a node computed from inputs. Used by op implementations.
  Tensor record(Shape shape, std::shared_ptr<const std::vector<double>> value,
                std::span<const Tensor* const> inputs, BackwardFn backward);

  /// Seeds d loss / d loss = 1 and propagates to every reachable node.
  /// Gradients from any previous call are discarded.
  void backward(const Tensor& loss);

  bool has_grad(const Tensor& t) const;
  /// Gradient of t, or zeros of t's shape when t was not reached.
  std::vector<double> grad(const Tensor& t) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::size_t numel = 0;
    std::vector<NodeId> parents;  // kNoNode for untracked inputs
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// ---------------------------------------------------------------------------
// Op kinds. Shape rules are stated per op; violations throw ShapeError naming
// the op and the offending shapes.
// ---------------------------------------------------------------------------

/// (m,k)x(k,n) -> (m,n); (k)x(k,n) -> (n); (m,k)x(k) -> (m).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Equal shapes, or either side of shape [1].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product; equal shapes, or either side of shape [1].
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Concatenation along axis 0; trailing dimensions must agree.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Rows [begin, end) along axis 0.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
/// Natural log; inputs must be positive.
Tensor log(const Tensor& a);
/// Over the last axis (row-wise for rank 2).
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// table (V,e), ids in [0,V) -> (n,e).
Tensor embedding(const Tensor& table, std::span<const int> ids);
/// x (n,c), filters (width*c, f), bias (f) -> (n-width+1, f). Requires n >= width.
Tensor conv1d(const Tensor& x, const Tensor& filters, const Tensor& bias, std::size_t width);
/// (m,f) -> (f). Gradient routes to the first maximal row on ties.
Tensor max_pool_time(const Tensor& x);
/// values (n) scattered and summed into a zero vector of length size.
Tensor scatter_add(const Tensor& values, std::span<const int> indices, std::size_t size);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---------------------------------------------------------------------------
// Finite-difference verification.
// ---------------------------------------------------------------------------

/// Scalar function of a parameter list. Must be deterministic and must build
/// its result only through ops on the given tensors.
using ScalarFn = std::function<Tensor(std::span<const Tensor> params)>;

/// max over all parameter entries of |analytic - numeric| / max(1, |numeric|),
/// numeric by central differences with step eps.
double grad_check(const ScalarFn& f, std::span<const Tensor> params, double eps = 1e-5);

}  // namespace splitpit::ad
