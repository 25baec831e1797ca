#pragma once

// Reverse-mode differentiation over a linear tape. Nodes are appended in
// execution order and replayed backwards, so the gradient reduction order is
// a fixed function of the forward program.

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>

#include "pasta/tensor.hpp"

namespace pasta {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that accumulates a gradient (a trainable parameter).
  Var variable(Tensor value);

  /// Appends an op result. `backward` runs only if some parent requires grad.
  /// Throws NumericError if `value` holds NaN or Inf.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  /// Throws ShapeError unless `loss` holds exactly one element.
  void backward(const Var& loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of a node; zeros if nothing flowed into it.
  const Tensor& grad(const Var& v);
  const Tensor& grad(std::size_t id);
  /// Mutable gradient buffer, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

namespace ops {

enum class ConvMode { Dense, Depthwise };
enum class Activation { Relu, Sigmoid, Tanh };
enum class Pool { Avg, Max };

/// Same-padded (zero) stride-1 convolution over NHWC input.
/// Dense kernel: [k, k, Cin, Cout]; depthwise kernel: [k, k, C]. Bias: [Cout].
Var conv2d(const Var& input, const Var& kernel, const Var& bias, ConvMode mode);

/// input [B, Din] x weight [Din, Dout] + bias [Dout].
Var fully_connected(const Var& input, const Var& weight, const Var& bias);

Var activation(const Var& input, Activation kind);
inline Var relu(const Var& x) { return activation(x, Activation::Relu); }
inline Var sigmoid(const Var& x) { return activation(x, Activation::Sigmoid); }
inline Var tanh(const Var& x) { return activation(x, Activation::Tanh); }

/// [B, H, W, C] -> [B, 1, 1, C]. Max routes its gradient to the first maximum
/// in row-major order.
Var global_pool(const Var& input, Pool kind);

/// Element-wise a + b / a * b. `b` may equal a's shape or be [B, 1, 1, C]
/// against a [B, H, W, C] `a`.
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var reshape(const Var& input, Shape shape);

/// Mean Huber loss; returns a [1] node.
Var huber_loss(const Var& pred, const Var& target, double delta);

}  // namespace ops
}  // namespace pasta
