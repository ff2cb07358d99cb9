#include "splitpit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "splitpit/error.hpp"

namespace splitpit::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

using Buffer = std::vector<double>;
using BufferPtr = std::shared_ptr<Buffer>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": " + why + " (shape " + to_string(a) + ")");
}

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) shape_error("tensor", shape, "rank must be 1 or 2");
  for (std::size_t d : shape) {
    if (d == 0) shape_error("tensor", shape, "dimensions must be positive");
  }
}

Tape* common_tape(std::span<const Tensor* const> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape && t->tape() != tape) throw Error("inputs were recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

// Builds the output tensor; the backward closure is only constructed when at
// least one input is on a tape.
template <typename MakeBackward>
Tensor emit(Shape shape, BufferPtr value, std::initializer_list<const Tensor*> inputs,
            MakeBackward&& make_backward) {
  std::span<const Tensor* const> in(inputs.begin(), inputs.size());
  Tape* tape = common_tape(in);
  if (!tape) return Tensor(std::move(shape), std::move(*value));
  std::shared_ptr<const Buffer> out = value;
  return tape->record(std::move(shape), out, in, make_backward(out));
}

template <typename MakeBackward>
Tensor emit_many(Shape shape, BufferPtr value, std::span<const Tensor* const> inputs,
                 MakeBackward&& make_backward) {
  Tape* tape = common_tape(inputs);
  if (!tape) return Tensor(std::move(shape), std::move(*value));
  std::shared_ptr<const Buffer> out = value;
  return tape->record(std::move(shape), out, inputs, make_backward(out));
}

bool is_scalar(const Tensor& t) { return t.size() == 1; }

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_rule(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (is_scalar(a)) return Broadcast::kLeftScalar;
  if (is_scalar(b)) return Broadcast::kRightScalar;
  shape_error(op, a.shape(), b.shape());
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (numel(shape_) != data.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " needs " +
                     std::to_string(numel(shape_)) + " values, got " +
                     std::to_string(data.size()));
  }
  data_ = std::make_shared<const Buffer>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), Buffer(n, 0.0));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::span<const double> Tensor::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: expected a single element, shape " + to_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = kNoNode;
  return t;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::leaf(const Tensor& value) {
  if (value.empty()) throw ShapeError("leaf: empty tensor");
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{t.size(), {}, nullptr});
  return t;
}

Tensor Tape::record(Shape shape, std::shared_ptr<const std::vector<double>> value,
                    std::span<const Tensor* const> inputs, BackwardFn backward) {
  Node node;
  node.numel = value->size();
  node.parents.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    node.parents.push_back(in->tape() == this ? in->node() : kNoNode);
  }
  node.backward = std::move(backward);

  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(value);
  t.tape_ = this;
  t.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw Error("backward: loss was not recorded on this tape");
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(loss.node())] = {1.0};

  std::vector<double*> in_grads;
  for (NodeId id = loss.node(); id >= 0; --id) {
    const auto idx = static_cast<std::size_t>(id);
    if (grads_[idx].empty()) continue;
    const Node& node = nodes_[idx];
    if (!node.backward) continue;
    in_grads.assign(node.parents.size(), nullptr);
    bool any = false;
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const NodeId p = node.parents[i];
      if (p == kNoNode) continue;
      auto& g = grads_[static_cast<std::size_t>(p)];
      if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(p)].numel, 0.0);
      in_grads[i] = g.data();
      any = true;
    }
    if (any) node.backward(grads_[idx], in_grads);
  }
}

bool Tape::has_grad(const Tensor& t) const {
  if (t.tape() != this) return false;
  const auto idx = static_cast<std::size_t>(t.node());
  return idx < grads_.size() && !grads_[idx].empty();
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (has_grad(t)) return grads_[static_cast<std::size_t>(t.node())];
  return std::vector<double>(t.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  std::size_t m = 0, k = 0, n = 0;
  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    out_shape = {m, n};
  } else if (a.rank() == 1 && b.rank() == 2) {
    m = 1, k = a.dim(0), n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    out_shape = {n};
  } else if (a.rank() == 2 && b.rank() == 1) {
    m = a.dim(0), k = a.dim(1), n = 1;
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    out_shape = {m};
  } else {
    m = 1, k = a.dim(0), n = 1;
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    out_shape = {1};
  }

  auto value = std::make_shared<Buffer>(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = value->data();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[p];
      C[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* c = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double s = A[i * k + p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += s * brow[j];
      }
    }
  }

  return emit(std::move(out_shape), value, {&a, &b}, [&, m, k, n](const auto&) {
    auto av = a.storage();
    auto bv = b.storage();
    return [av, bv, m, k, n](std::span<const double> g, std::span<double* const> gin) {
      const double* A = av->data();
      const double* B = bv->data();
      if (double* gA = gin[0]) {
        for (std::size_t i = 0; i < m; ++i) {
          const double* gc = g.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = B + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gc[j] * brow[j];
            gA[i * k + p] += acc;
          }
        }
      }
      if (double* gB = gin[1]) {
        for (std::size_t i = 0; i < m; ++i) {
          const double* gc = g.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double s = A[i * k + p];
            double* gb = gB + p * n;
            for (std::size_t j = 0; j < n; ++j) gb[j] += s * gc[j];
          }
        }
      }
    };
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast rule = broadcast_rule("add", a, b);
  const Tensor& big = rule == Broadcast::kLeftScalar ? b : a;
  auto value = std::make_shared<Buffer>(big.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < value->size(); ++i) {
    const double x = rule == Broadcast::kLeftScalar ? av[0] : av[i];
    const double y = rule == Broadcast::kRightScalar ? bv[0] : bv[i];
    (*value)[i] = x + y;
  }
  return emit(big.shape(), value, {&a, &b}, [rule](const auto&) {
    return [rule](std::span<const double> g, std::span<double* const> gin) {
      for (int side = 0; side < 2; ++side) {
        double* gx = gin[side];
        if (!gx) continue;
        const bool reduce = (side == 0 && rule == Broadcast::kLeftScalar) ||
                            (side == 1 && rule == Broadcast::kRightScalar);
        if (reduce) {
          double acc = 0.0;
          for (double v : g) acc += v;
          gx[0] += acc;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast rule = broadcast_rule("mul", a, b);
  const Tensor& big = rule == Broadcast::kLeftScalar ? b : a;
  auto value = std::make_shared<Buffer>(big.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < value->size(); ++i) {
    const double x = rule == Broadcast::kLeftScalar ? av[0] : av[i];
    const double y = rule == Broadcast::kRightScalar ? bv[0] : bv[i];
    (*value)[i] = x * y;
  }
  return emit(big.shape(), value, {&a, &b}, [&, rule](const auto&) {
    auto ap = a.storage();
    auto bp = b.storage();
    return [ap, bp, rule](std::span<const double> g, std::span<double* const> gin) {
      const Buffer& A = *ap;
      const Buffer& B = *bp;
      auto at = [&](const Buffer& v, bool scalar, std::size_t i) { return scalar ? v[0] : v[i]; };
      const bool a_scalar = rule == Broadcast::kLeftScalar;
      const bool b_scalar = rule == Broadcast::kRightScalar;
      if (double* ga = gin[0]) {
        if (a_scalar) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * B[i];
          ga[0] += acc;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * at(B, b_scalar, i);
        }
      }
      if (double* gb = gin[1]) {
        if (b_scalar) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
          gb[0] += acc;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * at(A, a_scalar, i);
        }
      }
    };
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto value = std::make_shared<Buffer>(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) (*value)[i] = factor * av[i];
  return emit(a.shape(), value, {&a}, [factor](const auto&) {
    return [factor](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += factor * g[i];
    };
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = parts[0];
  Shape out_shape = first.shape();
  out_shape[0] = 0;
  std::vector<std::size_t> sizes;
  sizes.reserve(parts.size());
  for (const Tensor& p : parts) {
    if (p.rank() != first.rank()) shape_error("concat", first.shape(), p.shape());
    for (std::size_t d = 1; d < p.rank(); ++d) {
      if (p.dim(d) != first.dim(d)) shape_error("concat", first.shape(), p.shape());
    }
    out_shape[0] += p.dim(0);
    sizes.push_back(p.size());
  }
  auto value = std::make_shared<Buffer>();
  value->reserve(numel(out_shape));
  for (const Tensor& p : parts) value->insert(value->end(), p.data().begin(), p.data().end());

  std::vector<const Tensor*> inputs;
  inputs.reserve(parts.size());
  for (const Tensor& p : parts) inputs.push_back(&p);
  return emit_many(std::move(out_shape), value, inputs, [&](const auto&) {
    return [sizes = std::move(sizes)](std::span<const double> g, std::span<double* const> gin) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (double* gx = gin[i]) {
          for (std::size_t j = 0; j < sizes[i]; ++j) gx[j] += g[offset + j];
        }
        offset += sizes[i];
      }
    };
  });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.dim(0)) {
    shape_error("slice", a.shape(),
                "invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ")");
  }
  const std::size_t row = a.size() / a.dim(0);
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  auto av = a.data();
  auto value = std::make_shared<Buffer>(av.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                        av.begin() + static_cast<std::ptrdiff_t>(end * row));
  const std::size_t offset = begin * row;
  return emit(std::move(out_shape), value, {&a}, [offset](const auto&) {
    return [offset](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][offset + i] += g[i];
    };
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_shape(shape);
  if (numel(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  auto value = std::make_shared<Buffer>(a.data().begin(), a.data().end());
  return emit(std::move(shape), value, {&a}, [](const auto&) {
    return [](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    };
  });
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise op whose derivative is expressed through input and output.
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  auto value = std::make_shared<Buffer>(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) (*value)[i] = f(av[i]);
  return emit(a.shape(), value, {&a}, [&](const std::shared_ptr<const Buffer>& out) {
    auto in = a.storage();
    return [in, out, df](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * df((*in)[i], (*out)[i]);
    };
  });
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a) {
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.size() / cols;
  auto value = std::make_shared<Buffer>(a.size());
  auto av = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* y = value->data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[j] /= total;
  }
  return emit(a.shape(), value, {&a}, [rows, cols](const std::shared_ptr<const Buffer>& out) {
    return [out, rows, cols](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = out->data() + r * cols;
        const double* gy = g.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
        for (std::size_t j = 0; j < cols; ++j) gin[0][r * cols + j] += y[j] * (gy[j] - dot);
      }
    };
  });
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.size() / cols;
  auto value = std::make_shared<Buffer>(a.size());
  auto av = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* y = value->data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(x[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
  }
  return emit(a.shape(), value, {&a}, [rows, cols](const std::shared_ptr<const Buffer>& out) {
    return [out, rows, cols](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = out->data() + r * cols;
        const double* gy = g.data() + r * cols;
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += gy[j];
        for (std::size_t j = 0; j < cols; ++j) {
          gin[0][r * cols + j] += gy[j] - std::exp(y[j]) * total;
        }
      }
    };
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) shape_error("embedding", table.shape(), "table must be rank 2");
  if (ids.empty()) shape_error("embedding", table.shape(), "no ids given");
  const std::size_t vocab = table.dim(0);
  const std::size_t width = table.dim(1);
  auto tv = table.data();
  auto value = std::make_shared<Buffer>(ids.size() * width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      shape_error("embedding", table.shape(), "id " + std::to_string(ids[i]) + " out of range");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * width), width,
                value->begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return emit({ids.size(), width}, value, {&table}, [&](const auto&) {
    return [rows = std::move(rows), width](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double* gt = gin[0] + static_cast<std::size_t>(rows[i]) * width;
        for (std::size_t j = 0; j < width; ++j) gt[j] += g[i * width + j];
      }
    };
  });
}

Tensor conv1d(const Tensor& x, const Tensor& filters, const Tensor& bias, std::size_t width) {
  if (x.rank() != 2) shape_error("conv1d", x.shape(), "input must be rank 2");
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  if (width == 0 || n < width) {
    shape_error("conv1d", x.shape(), "input shorter than filter width " + std::to_string(width));
  }
  if (filters.rank() != 2 || filters.dim(0) != width * c) shape_error("conv1d", x.shape(), filters.shape());
  const std::size_t f = filters.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != f) shape_error("conv1d", filters.shape(), bias.shape());

  const std::size_t steps = n - width + 1;
  const std::size_t window = width * c;
  auto value = std::make_shared<Buffer>(steps * f);
  const double* X = x.data().data();
  const double* W = filters.data().data();
  const double* b = bias.data().data();
  for (std::size_t t = 0; t < steps; ++t) {
    double* y = value->data() + t * f;
    std::copy_n(b, f, y);
    const double* xw = X + t * c;
    for (std::size_t q = 0; q < window; ++q) {
      const double s = xw[q];
      const double* wrow = W + q * f;
      for (std::size_t j = 0; j < f; ++j) y[j] += s * wrow[j];
    }
  }
  return emit({steps, f}, value, {&x, &filters, &bias}, [&](const auto&) {
    auto xv = x.storage();
    auto wv = filters.storage();
    return [xv, wv, steps, window, c, f](std::span<const double> g, std::span<double* const> gin) {
      const double* X = xv->data();
      const double* W = wv->data();
      for (std::size_t t = 0; t < steps; ++t) {
        const double* gy = g.data() + t * f;
        if (double* gx = gin[0]) {
          for (std::size_t q = 0; q < window; ++q) {
            const double* wrow = W + q * f;
            double acc = 0.0;
            for (std::size_t j = 0; j < f; ++j) acc += wrow[j] * gy[j];
            gx[t * c + q] += acc;
          }
        }
        if (double* gw = gin[1]) {
          for (std::size_t q = 0; q < window; ++q) {
            const double s = X[t * c + q];
            double* grow = gw + q * f;
            for (std::size_t j = 0; j < f; ++j) grow[j] += s * gy[j];
          }
        }
        if (double* gb = gin[2]) {
          for (std::size_t j = 0; j < f; ++j) gb[j] += gy[j];
        }
      }
    };
  });
}

Tensor max_pool_time(const Tensor& x) {
  if (x.rank() != 2) shape_error("max_pool_time", x.shape(), "input must be rank 2");
  const std::size_t m = x.dim(0);
  const std::size_t f = x.dim(1);
  auto xv = x.data();
  auto value = std::make_shared<Buffer>(f);
  std::vector<std::size_t> arg(f, 0);
  for (std::size_t j = 0; j < f; ++j) {
    double best = xv[j];
    for (std::size_t t = 1; t < m; ++t) {
      if (xv[t * f + j] > best) {
        best = xv[t * f + j];
        arg[j] = t;
      }
    }
    (*value)[j] = best;
  }
  return emit({f}, value, {&x}, [&](const auto&) {
    return [arg = std::move(arg), f](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t j = 0; j < f; ++j) gin[0][arg[j] * f + j] += g[j];
    };
  });
}

Tensor scatter_add(const Tensor& values, std::span<const int> indices, std::size_t size) {
  if (values.rank() != 1 || values.dim(0) != indices.size()) {
    shape_error("scatter_add", values.shape(),
                "expected one index per value, got " + std::to_string(indices.size()));
  }
  if (size == 0) shape_error("scatter_add", values.shape(), "output size must be positive");
  auto value = std::make_shared<Buffer>(size, 0.0);
  auto vv = values.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= size) {
      shape_error("scatter_add", values.shape(),
                  "index " + std::to_string(indices[i]) + " out of range " + std::to_string(size));
    }
    (*value)[static_cast<std::size_t>(indices[i])] += vv[i];
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return emit({size}, value, {&values}, [&](const auto&) {
    return [idx = std::move(idx)](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < idx.size(); ++i) gin[0][i] += g[static_cast<std::size_t>(idx[i])];
    };
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto value = std::make_shared<Buffer>(1, total);
  const std::size_t n = a.size();
  return emit({1}, value, {&a}, [n](const auto&) {
    return [n](std::span<const double> g, std::span<double* const> gin) {
      for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0];
    };
  });
}

Tensor mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const std::size_t n = a.size();
  auto value = std::make_shared<Buffer>(1, total / static_cast<double>(n));
  return emit({1}, value, {&a}, [n](const auto&) {
    return [n](std::span<const double> g, std::span<double* const> gin) {
      const double share = g[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) gin[0][i] += share;
    };
  });
}

// ---------------------------------------------------------------------------

double grad_check(const ScalarFn& f, std::span<const Tensor> params, double eps) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");

  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  const Tensor loss = f(leaves);
  if (!std::isfinite(loss.item())) throw Error("grad_check: function value is not finite");
  if (!loss.tracked()) {
    // Constant in every parameter: all analytic gradients are zero.
    tape.backward(tape.leaf(Tensor::scalar(0.0)));
  } else {
    tape.backward(loss);
  }

  std::vector<Tensor> probe(params.begin(), params.end());
  for (auto& t : probe) t = t.detach();

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double> analytic = tape.grad(leaves[i]);
    std::vector<double> values(params[i].data().begin(), params[i].data().end());
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double original = values[j];
      auto evaluate = [&](double v) {
        values[j] = v;
        probe[i] = Tensor(params[i].shape(), values);
        const double out = f(probe).item();
        if (!std::isfinite(out)) throw Error("grad_check: function value is not finite");
        return out;
      };
      const double plus = evaluate(original + eps);
      const double minus = evaluate(original - eps);
      values[j] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
    probe[i] = params[i].detach();
  }
  return worst;
}

}  // namespace splitpit::ad
