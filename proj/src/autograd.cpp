#include "pasta/autograd.hpp"

#include <cmath>
#include <string>

#include "pasta/error.hpp"
#include "pasta/kernels.hpp"

namespace pasta {

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an empty Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + " produced a non-finite value");
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw InvalidArgument(std::string(op) + ": operand from another tape");
    needs = needs || requires_grad(p.id());
  }
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.grad_ready) {
    n.grad = Tensor::zeros_like(n.value);
    n.grad_ready = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(std::size_t id) { return grad_buffer(id); }
const Tensor& Tape::grad(const Var& v) { return grad_buffer(v.id()); }

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw InvalidArgument("backward: loss from another tape");
  if (loss.value().size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " + loss.shape().str());
  for (Node& n : nodes_) n.grad_ready = false;
  grad_buffer(loss.id()).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.grad_ready && n.backward) n.backward(*this, id);
  }
}

namespace ops {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

struct ConvGeometry {
  std::size_t batch, height, width, cin, cout, k, pad;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& kernel, const Shape& bias, ConvMode mode) {
  require(in.rank() == 4, "conv2d: input must be [B,H,W,C], got " + in.str());
  ConvGeometry g{in[0], in[1], in[2], in[3], 0, 0, 0};
  if (mode == ConvMode::Dense) {
    require(kernel.rank() == 4 && kernel[0] == kernel[1],
            "conv2d: dense kernel must be [k,k,Cin,Cout], got " + kernel.str());
    require(kernel[2] == g.cin, "conv2d: kernel Cin " + std::to_string(kernel[2]) +
                                    " != input channels " + std::to_string(g.cin));
    g.cout = kernel[3];
  } else {
    require(kernel.rank() == 3 && kernel[0] == kernel[1],
            "conv2d: depthwise kernel must be [k,k,C], got " + kernel.str());
    require(kernel[2] == g.cin, "conv2d: depthwise kernel channels != input channels");
    g.cout = g.cin;
  }
  g.k = kernel[0];
  if (g.k % 2 == 0) throw InvalidArgument("conv2d: kernel size must be odd, got " + std::to_string(g.k));
  require(bias.rank() == 1 && bias[0] == g.cout, "conv2d: bias must be [Cout], got " + bias.str());
  g.pad = g.k / 2;
  return g;
}

// Calls fn(out_offset, in_offset, tap) for every in-bounds (pixel, tap) pair in
// a fixed order: batch, row, column, then kernel row and column.
template <typename Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto k = static_cast<std::ptrdiff_t>(g.k);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::ptrdiff_t i = 0; i < h; ++i) {
      for (std::ptrdiff_t j = 0; j < w; ++j) {
        const std::size_t out_off = ((b * g.height + i) * g.width + j) * g.cout;
        for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t ii = i + ky - pad;
          if (ii < 0 || ii >= h) continue;
          for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t jj = j + kx - pad;
            if (jj < 0 || jj >= w) continue;
            const std::size_t in_off = ((b * g.height + ii) * g.width + jj) * g.cin;
            fn(out_off, in_off, static_cast<std::size_t>(ky * k + kx));
          }
        }
      }
    }
  }
}

bool is_channel_broadcast(const Shape& a, const Shape& b) {
  return a.rank() == 4 && b.rank() == 4 && b[0] == a[0] && b[1] == 1 && b[2] == 1 && b[3] == a[3] &&
         !(a[1] == 1 && a[2] == 1);
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, ConvMode mode) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), bias.shape(), mode);
  const auto& kt = kernels::active();
  Tensor out(Shape{g.batch, g.height, g.width, g.cout});
  const double* x = input.value().raw();
  const double* kw = kernel.value().raw();
  const double* bw = bias.value().raw();
  double* y = out.raw();
  const std::size_t pixels = g.batch * g.height * g.width;
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t c = 0; c < g.cout; ++c) y[p * g.cout + c] = bw[c];

  if (mode == ConvMode::Dense) {
    const std::size_t tap_stride = g.cin * g.cout;
    for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t tap) {
      kt.vecmat(x + i, kw + tap * tap_stride, y + o, g.cin, g.cout);
    });
  } else {
    for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t tap) {
      kt.mul_add(x + i, kw + tap * g.cin, y + o, g.cin);
    });
  }

  return input.tape()->record(
      "conv2d", std::move(out), {input, kernel, bias},
      [in_id = input.id(), k_id = kernel.id(), b_id = bias.id(), g, mode](Tape& tape, std::size_t self) {
        const auto& kt = kernels::active();
        const double* gy = tape.grad(self).raw();
        const double* x = tape.value(in_id).raw();
        const double* kw = tape.value(k_id).raw();
        double* gx = tape.requires_grad(in_id) ? tape.grad_buffer(in_id).raw() : nullptr;
        double* gk = tape.requires_grad(k_id) ? tape.grad_buffer(k_id).raw() : nullptr;
        if (tape.requires_grad(b_id)) {
          double* gb = tape.grad_buffer(b_id).raw();
          const std::size_t pixels = g.batch * g.height * g.width;
          for (std::size_t p = 0; p < pixels; ++p) kt.add(gb, gy + p * g.cout, gb, g.cout);
        }
        if (mode == ConvMode::Dense) {
          const std::size_t tap_stride = g.cin * g.cout;
          for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t tap) {
            if (gx) kt.matvec(kw + tap * tap_stride, gy + o, gx + i, g.cin, g.cout);
            if (gk) kt.ger(x + i, gy + o, gk + tap * tap_stride, g.cin, g.cout);
          });
        } else {
          for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t tap) {
            if (gx) kt.mul_add(gy + o, kw + tap * g.cin, gx + i, g.cin);
            if (gk) kt.mul_add(x + i, gy + o, gk + tap * g.cin, g.cin);
          });
        }
      });
}

Var fully_connected(const Var& input, const Var& weight, const Var& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(xs.rank() == 2, "fully_connected: input must be [B,Din], got " + xs.str());
  require(ws.rank() == 2 && ws[0] == xs[1],
          "fully_connected: weight " + ws.str() + " incompatible with input " + xs.str());
  require(bias.shape().rank() == 1 && bias.shape()[0] == ws[1],
          "fully_connected: bias must be [Dout], got " + bias.shape().str());
  const std::size_t batch = xs[0], din = ws[0], dout = ws[1];
  const auto& kt = kernels::active();
  Tensor out(Shape{batch, dout});
  for (std::size_t b = 0; b < batch; ++b) {
    double* y = out.raw() + b * dout;
    for (std::size_t c = 0; c < dout; ++c) y[c] = bias.value()[c];
    kt.vecmat(input.value().raw() + b * din, weight.value().raw(), y, din, dout);
  }
  return input.tape()->record(
      "fully_connected", std::move(out), {input, weight, bias},
      [in_id = input.id(), w_id = weight.id(), b_id = bias.id(), batch, din, dout](Tape& tape,
                                                                                  std::size_t self) {
        const auto& kt = kernels::active();
        const double* gy = tape.grad(self).raw();
        const double* x = tape.value(in_id).raw();
        const double* w = tape.value(w_id).raw();
        double* gx = tape.requires_grad(in_id) ? tape.grad_buffer(in_id).raw() : nullptr;
        double* gw = tape.requires_grad(w_id) ? tape.grad_buffer(w_id).raw() : nullptr;
        double* gb = tape.requires_grad(b_id) ? tape.grad_buffer(b_id).raw() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* g = gy + b * dout;
          if (gx) kt.matvec(w, g, gx + b * din, din, dout);
          if (gw) kt.ger(x + b * din, g, gw, din, dout);
          if (gb) kt.add(gb, g, gb, dout);
        }
      });
}

Var activation(const Var& input, Activation kind) {
  const Tensor& x = input.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    switch (kind) {
      case Activation::Relu: out[i] = v > 0.0 ? v : 0.0; break;
      case Activation::Sigmoid: out[i] = 1.0 / (1.0 + std::exp(-v)); break;
      case Activation::Tanh: out[i] = std::tanh(v); break;
    }
  }
  return input.tape()->record(
      "activation", std::move(out), {input}, [in_id = input.id(), kind](Tape& tape, std::size_t self) {
        const Tensor& gy = tape.grad(self);
        const Tensor& y = tape.value(self);
        const Tensor& x = tape.value(in_id);
        Tensor& gx = tape.grad_buffer(in_id);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          switch (kind) {
            case Activation::Relu: gx[i] += x[i] > 0.0 ? gy[i] : 0.0; break;
            case Activation::Sigmoid: gx[i] += gy[i] * (y[i] * (1.0 - y[i])); break;
            case Activation::Tanh: gx[i] += gy[i] * (1.0 - y[i] * y[i]); break;
          }
        }
      });
}

Var global_pool(const Var& input, Pool kind) {
  const Shape& s = input.shape();
  require(s.rank() == 4, "global_pool: input must be [B,H,W,C], got " + s.str());
  const std::size_t batch = s[0], h = s[1], w = s[2], c = s[3];
  if (h == 0 || w == 0) throw ShapeError("global_pool: empty spatial extent " + s.str());
  const double* x = input.value().raw();
  Tensor out(Shape{batch, 1, 1, c});
  std::vector<std::size_t> argmax(kind == Pool::Max ? batch * c : 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * h * w * c;
    double* y = out.raw() + b * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (kind == Pool::Avg) {
        double sum = 0.0;
        for (std::size_t p = 0; p < h * w; ++p) sum += xb[p * c + ch];
        y[ch] = sum / static_cast<double>(h * w);
      } else {
        std::size_t best = 0;
        for (std::size_t p = 1; p < h * w; ++p)
          if (xb[p * c + ch] > xb[best * c + ch]) best = p;
        y[ch] = xb[best * c + ch];
        argmax[b * c + ch] = best;
      }
    }
  }
  return input.tape()->record(
      "global_pool", std::move(out), {input},
      [in_id = input.id(), kind, batch, h, w, c, argmax = std::move(argmax)](Tape& tape, std::size_t self) {
        const double* gy = tape.grad(self).raw();
        double* gx = tape.grad_buffer(in_id).raw();
        const double inv = 1.0 / static_cast<double>(h * w);
        for (std::size_t b = 0; b < batch; ++b) {
          double* gxb = gx + b * h * w * c;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double g = gy[b * c + ch];
            if (kind == Pool::Avg) {
              for (std::size_t p = 0; p < h * w; ++p) gxb[p * c + ch] += g * inv;
            } else {
              gxb[argmax[b * c + ch] * c + ch] += g;
            }
          }
        }
      });
}

namespace {

enum class Binary { Add, Mul };

Var binary(const Var& a, const Var& b, Binary kind) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const bool same = as == bs;
  const bool bcast = !same && is_channel_broadcast(as, bs);
  if (!same && !bcast)
    throw ShapeError(std::string(kind == Binary::Add ? "add" : "mul") + ": incompatible shapes " +
                     as.str() + " and " + bs.str());
  const auto& kt = kernels::active();
  Tensor out(as);
  const double* x = a.value().raw();
  const double* y = b.value().raw();
  auto op = kind == Binary::Add ? kt.add : kt.mul;
  if (same) {
    op(x, y, out.raw(), out.size());
  } else {
    const std::size_t c = as[3], hw = as[1] * as[2];
    for (std::size_t bi = 0; bi < as[0]; ++bi)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t off = (bi * hw + p) * c;
        op(x + off, y + bi * c, out.raw() + off, c);
      }
  }
  return a.tape()->record(
      kind == Binary::Add ? "add" : "mul", std::move(out), {a, b},
      [a_id = a.id(), b_id = b.id(), kind, same, as](Tape& tape, std::size_t self) {
        const auto& kt = kernels::active();
        const Tensor& gy = tape.grad(self);
        const double* av = tape.value(a_id).raw();
        const double* bv = tape.value(b_id).raw();
        if (tape.requires_grad(a_id)) {
          double* ga = tape.grad_buffer(a_id).raw();
          if (kind == Binary::Add) {
            kt.add(ga, gy.raw(), ga, gy.size());
          } else if (same) {
            kt.mul_add(gy.raw(), bv, ga, gy.size());
          } else {
            const std::size_t c = as[3], hw = as[1] * as[2];
            for (std::size_t bi = 0; bi < as[0]; ++bi)
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t off = (bi * hw + p) * c;
                kt.mul_add(gy.raw() + off, bv + bi * c, ga + off, c);
              }
          }
        }
        if (tape.requires_grad(b_id)) {
          double* gb = tape.grad_buffer(b_id).raw();
          if (same) {
            if (kind == Binary::Add) kt.add(gb, gy.raw(), gb, gy.size());
            else kt.mul_add(gy.raw(), av, gb, gy.size());
          } else {
            const std::size_t c = as[3], hw = as[1] * as[2];
            for (std::size_t bi = 0; bi < as[0]; ++bi)
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t off = (bi * hw + p) * c;
                if (kind == Binary::Add) kt.add(gb + bi * c, gy.raw() + off, gb + bi * c, c);
                else kt.mul_add(gy.raw() + off, av + off, gb + bi * c, c);
              }
          }
        }
      });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, Binary::Add); }
Var mul(const Var& a, const Var& b) { return binary(a, b, Binary::Mul); }

Var reshape(const Var& input, Shape shape) {
  Tensor out = input.value().reshaped(std::move(shape));
  return input.tape()->record("reshape", std::move(out), {input},
                              [in_id = input.id()](Tape& tape, std::size_t self) {
                                const Tensor& gy = tape.grad(self);
                                Tensor& gx = tape.grad_buffer(in_id);
                                kernels::active().add(gx.raw(), gy.raw(), gx.raw(), gy.size());
                              });
}

Var huber_loss(const Var& pred, const Var& target, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("huber_loss: delta must be positive");
  if (pred.shape() != target.shape())
    throw ShapeError("huber_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
  const Tensor& p = pred.value();
  const Tensor& t = target.value();
  const std::size_t n = p.size();
  if (n == 0) throw ShapeError("huber_loss: empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = p[i] - t[i];
    const double ar = std::fabs(r);
    sum += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
  }
  Tensor out(Shape{1}, std::vector<double>{sum / static_cast<double>(n)});
  return pred.tape()->record(
      "huber_loss", std::move(out), {pred, target},
      [p_id = pred.id(), t_id = target.id(), delta, n](Tape& tape, std::size_t self) {
        const double g = tape.grad(self)[0] / static_cast<double>(n);
        const Tensor& p = tape.value(p_id);
        const Tensor& t = tape.value(t_id);
        const bool gp = tape.requires_grad(p_id);
        const bool gt = tape.requires_grad(t_id);
        for (std::size_t i = 0; i < n; ++i) {
          const double r = p[i] - t[i];
          const double d = std::fabs(r) <= delta ? r : (r > 0.0 ? delta : -delta);
          if (gp) tape.grad_buffer(p_id)[i] += g * d;
          if (gt) tape.grad_buffer(t_id)[i] -= g * d;
        }
      });
}

}  // namespace ops
}  // namespace pasta
