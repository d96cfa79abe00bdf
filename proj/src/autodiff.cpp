#include "dasphys/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dasphys/error.hpp"

namespace dasphys::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::dimension,
              std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw Error(ErrorKind::dimension, std::string(op) + ": expected rank " + std::to_string(rank) +
                                          ", got " + shape_string(x.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw Error(ErrorKind::dimension, "axis " + std::to_string(axis) + " out of range for " +
                                          shape_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <class Fwd, class Dfdx>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Dfdx dfdx) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_node(x.shape(), std::move(out), {x}, op, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
  });
}

}  // namespace

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.size() > 4) throw Error(ErrorKind::rank, "tensor rank is limited to 4");
  if (ad::numel(shape) != values.size()) {
    throw Error(ErrorKind::dimension, "tensor payload of " + std::to_string(values.size()) +
                                          " values does not fill shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorKind::rank, "item() on a tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor make_node(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                 const char* op, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_node(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_node(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_node(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("div", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  return make_node(a.shape(), std::move(out), {a, b}, "div", [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / pb.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return factor * v; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary("add_scalar", x, [value](double v) { return v + value; },
               [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary("sqrt", x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return 0.5 / y; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary("leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  const auto in = x.data();
  const double total = std::accumulate(in.begin(), in.end(), 0.0);
  return make_node({}, {total}, {x}, "sum", [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto in = x.data();
  const double n = static_cast<double>(in.size());
  const double total = std::accumulate(in.begin(), in.end(), 0.0);
  return make_node({}, {total / n}, {x}, "mean", [n](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    const double share = self.grad[0] / n;
    for (double& v : g) v += share;
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner, 0.0);
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.extent; ++k) {
      const double* src = in.data() + (o * v.extent + k) * v.inner;
      double* dst = out.data() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  }
  return make_node(std::move(shape), std::move(out), {x}, "sum_axis", [v](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t k = 0; k < v.extent; ++k) {
        double* dst = g.data() + (o * v.extent + k) * v.inner;
        const double* src = self.grad.data() + o * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const double extent = static_cast<double>(axis_view(x.shape(), axis).extent);
  return scale(sum_axis(x, axis), 1.0 / extent);
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  const Shape& src = x.shape();
  if (src.size() != shape.size()) shape_error("broadcast_to", src, shape);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != shape[i] && src[i] != 1) shape_error("broadcast_to", src, shape);
  }
  const std::size_t rank = shape.size();
  // Source strides with zeros on broadcast axes.
  std::vector<std::size_t> stride(rank, 0);
  std::size_t acc = 1;
  for (std::size_t i = rank; i-- > 0;) {
    stride[i] = src[i] == 1 ? 0 : acc;
    acc *= src[i];
  }
  const std::size_t n = numel(shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += idx[i] * stride[i];
    map[flat] = off;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(n);
  const auto in = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = in[map[i]];
  return make_node(shape, std::move(out), {x}, "broadcast_to", [map = std::move(map)](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < map.size(); ++i) g[map[i]] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_node(std::move(shape), std::move(out), {x}, "reshape", [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(x.shape(), axis);
  if (length == 0 || start + length > v.extent) {
    throw Error(ErrorKind::dimension, "slice [" + std::to_string(start) + ", " +
                                          std::to_string(start + length) + ") outside axis of " +
                                          shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  std::vector<double> out(v.outer * length * v.inner);
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(in.data() + (o * v.extent + start) * v.inner, length * v.inner,
                out.data() + o * length * v.inner);
  }
  return make_node(std::move(shape), std::move(out), {x}, "slice", [v, start, length](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      double* dst = g.data() + (o * v.extent + start) * v.inner;
      const double* src = self.grad.data() + o * length * v.inner;
      for (std::size_t i = 0; i < length * v.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorKind::dimension, "concat of nothing");
  Shape shape = parts[0].shape();
  const AxisView first = axis_view(shape, axis);
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != shape.size()) shape_error("concat", shape, probe);
    probe[axis] = shape[axis];
    if (probe != shape) shape_error("concat", shape, p.shape());
    extents.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  shape[axis] = total;
  const std::size_t outer = first.outer;
  const std::size_t inner = first.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto in = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(in.data() + o * extents[k] * inner, extents[k] * inner,
                  out.data() + (o * total + offset) * inner);
    }
    offset += extents[k];
  }
  return make_node(std::move(shape), std::move(out), parts, "concat",
                   [extents, outer, inner, total](Node& self) {
                     std::size_t offset = 0;
                     for (std::size_t k = 0; k < self.parents.size(); ++k) {
                       Node& p = *self.parents[k];
                       if (p.requires_grad) {
                         auto& g = p.ensure_grad();
                         for (std::size_t o = 0; o < outer; ++o) {
                           const double* src = self.grad.data() + (o * total + offset) * inner;
                           double* dst = g.data() + o * extents[k] * inner;
                           for (std::size_t i = 0; i < extents[k] * inner; ++i) dst[i] += src[i];
                         }
                       }
                       offset += extents[k];
                     }
                   });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  const auto in = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_node({c, r}, std::move(out), {x}, "transpose", [r, c](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data(), B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return make_node({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = pb.value.data() + p * n;
          const double* grow = G + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.value[i * k + p];
          const double* grow = G + i * n;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

struct ConvGeom {
  std::size_t batch, in_ch, in_h, in_w, out_ch, kh, kw, out_h, out_w, stride, pad;
};

// Output columns [lo, hi) whose input column ow * stride - pad + kj is in range.
inline void valid_range(std::size_t out_extent, std::size_t in_extent, std::size_t stride,
                        std::size_t pad, std::size_t k, std::size_t& lo, std::size_t& hi) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto shift = static_cast<std::ptrdiff_t>(pad) - static_cast<std::ptrdiff_t>(k);
  // need 0 <= o*s - shift <= in_extent - 1
  std::ptrdiff_t l = shift <= 0 ? 0 : (shift + s - 1) / s;
  std::ptrdiff_t h = (static_cast<std::ptrdiff_t>(in_extent) - 1 + shift) / s + 1;
  if (static_cast<std::ptrdiff_t>(in_extent) - 1 + shift < 0) h = 0;
  l = std::max<std::ptrdiff_t>(l, 0);
  h = std::min<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(out_extent));
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(std::max(l, h));
}

void conv_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* y) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      double* yp = y + (n * g.out_ch + o) * out_plane;
      std::fill(yp, yp + out_plane, b ? b[o] : 0.0);
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const double* xp = x + (n * g.in_ch + c) * in_plane;
        const double* wp = w + (o * g.in_ch + c) * g.kh * g.kw;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
          std::size_t oh_lo, oh_hi;
          valid_range(g.out_h, g.in_h, g.stride, g.pad, ki, oh_lo, oh_hi);
          for (std::size_t kj = 0; kj < g.kw; ++kj) {
            const double wv = wp[ki * g.kw + kj];
            std::size_t ow_lo, ow_hi;
            valid_range(g.out_w, g.in_w, g.stride, g.pad, kj, ow_lo, ow_hi);
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::size_t ih = oh * g.stride + ki - g.pad;
              const double* xr = xp + ih * g.in_w + kj - g.pad;
              double* yr = yp + oh * g.out_w;
              if (g.stride == 1) {
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) yr[ow] += wv * xr[ow];
              } else {
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) yr[ow] += wv * xr[ow * g.stride];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const ConvGeom& g, const double* x, const double* w, const double* gy,
                   double* gx, double* gw, double* gb) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const double* gyp = gy + (n * g.out_ch + o) * out_plane;
      if (gb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) acc += gyp[i];
        gb[o] += acc;
      }
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const double* xp = x + (n * g.in_ch + c) * in_plane;
        double* gxp = gx ? gx + (n * g.in_ch + c) * in_plane : nullptr;
        const double* wp = w + (o * g.in_ch + c) * g.kh * g.kw;
        double* gwp = gw ? gw + (o * g.in_ch + c) * g.kh * g.kw : nullptr;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
          std::size_t oh_lo, oh_hi;
          valid_range(g.out_h, g.in_h, g.stride, g.pad, ki, oh_lo, oh_hi);
          for (std::size_t kj = 0; kj < g.kw; ++kj) {
            const double wv = wp[ki * g.kw + kj];
            std::size_t ow_lo, ow_hi;
            valid_range(g.out_w, g.in_w, g.stride, g.pad, kj, ow_lo, ow_hi);
            double acc = 0.0;
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::size_t ih = oh * g.stride + ki - g.pad;
              const std::size_t col0 = kj - g.pad;  // wraps for kj < pad; only used with ow offsets
              const double* gyr = gyp + oh * g.out_w;
              const double* xr = xp + ih * g.in_w;
              double* gxr = gxp ? gxp + ih * g.in_w : nullptr;
              for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                const std::size_t iw = ow * g.stride + col0;
                acc += gyr[ow] * xr[iw];
                if (gxr) gxr[iw] += wv * gyr[ow];
              }
            }
            if (gwp) gwp[ki * g.kw + kj] += acc;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  if (stride == 0) throw Error(ErrorKind::config, "conv2d stride must be >= 1");
  if (x.dim(1) != weight.dim(1)) shape_error("conv2d", x.shape(), weight.shape());
  const std::size_t kh = weight.dim(2), kw = weight.dim(3);
  if (x.dim(2) + 2 * pad < kh || x.dim(3) + 2 * pad < kw) shape_error("conv2d", x.shape(), weight.shape());
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    shape_error("conv2d bias", bias.shape(), weight.shape());
  }
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), kh, kw,
             (x.dim(2) + 2 * pad - kh) / stride + 1, (x.dim(3) + 2 * pad - kw) / stride + 1,
             stride, pad};
  std::vector<double> out(g.batch * g.out_ch * g.out_h * g.out_w);
  conv_forward(g, x.data().data(), weight.data().data(),
               bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_node({g.batch, g.out_ch, g.out_h, g.out_w}, std::move(out), parents, "conv2d",
                   [g](Node& self) {
                     Node& px = *self.parents[0];
                     Node& pw = *self.parents[1];
                     Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
                     double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                     double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                     double* gb = pb && pb->requires_grad ? pb->ensure_grad().data() : nullptr;
                     conv_backward(g, px.value.data(), pw.value.data(), self.grad.data(), gx, gw, gb);
                   });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride) {
  require_rank("conv_transpose2d", x, 4);
  require_rank("conv_transpose2d", weight, 4);
  if (stride == 0) throw Error(ErrorKind::config, "conv_transpose2d stride must be >= 1");
  if (x.dim(1) != weight.dim(0)) shape_error("conv_transpose2d", x.shape(), weight.shape());
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = weight.dim(1), KH = weight.dim(2), KW = weight.dim(3);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O)) {
    shape_error("conv_transpose2d bias", bias.shape(), weight.shape());
  }
  const std::size_t OH = (H - 1) * stride + KH, OW = (W - 1) * stride + KW;
  std::vector<double> out(N * O * OH * OW, 0.0);
  const double* xv = x.data().data();
  const double* wv = weight.data().data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < O; ++o) {
      double* yp = out.data() + (n * O + o) * OH * OW;
      if (bias.defined()) std::fill(yp, yp + OH * OW, bias.data()[o]);
      for (std::size_t c = 0; c < C; ++c) {
        const double* xp = xv + (n * C + c) * H * W;
        for (std::size_t ki = 0; ki < KH; ++ki)
          for (std::size_t kj = 0; kj < KW; ++kj) {
            const double w = wv[((c * O + o) * KH + ki) * KW + kj];
            for (std::size_t ih = 0; ih < H; ++ih) {
              double* yr = yp + (ih * stride + ki) * OW + kj;
              const double* xr = xp + ih * W;
              for (std::size_t iw = 0; iw < W; ++iw) yr[iw * stride] += w * xr[iw];
            }
          }
      }
    }
  }
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_node({N, O, OH, OW}, std::move(out), parents, "conv_transpose2d",
                   [N, C, H, W, O, KH, KW, OH, OW, stride](Node& self) {
                     Node& px = *self.parents[0];
                     Node& pw = *self.parents[1];
                     Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
                     double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                     double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                     double* gb = pb && pb->requires_grad ? pb->ensure_grad().data() : nullptr;
                     const double* gy = self.grad.data();
                     for (std::size_t n = 0; n < N; ++n) {
                       for (std::size_t o = 0; o < O; ++o) {
                         const double* gyp = gy + (n * O + o) * OH * OW;
                         if (gb) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < OH * OW; ++i) acc += gyp[i];
                           gb[o] += acc;
                         }
                         for (std::size_t c = 0; c < C; ++c) {
                           const double* xp = px.value.data() + (n * C + c) * H * W;
                           double* gxp = gx ? gx + (n * C + c) * H * W : nullptr;
                           for (std::size_t ki = 0; ki < KH; ++ki)
                             for (std::size_t kj = 0; kj < KW; ++kj) {
                               const std::size_t widx = ((c * O + o) * KH + ki) * KW + kj;
                               const double w = pw.value[widx];
                               double acc = 0.0;
                               for (std::size_t ih = 0; ih < H; ++ih) {
                                 const double* gyr = gyp + (ih * stride + ki) * OW + kj;
                                 const double* xr = xp + ih * W;
                                 double* gxr = gxp ? gxp + ih * W : nullptr;
                                 for (std::size_t iw = 0; iw < W; ++iw) {
                                   const double gv = gyr[iw * stride];
                                   acc += gv * xr[iw];
                                   if (gxr) gxr[iw] += w * gv;
                                 }
                               }
                               if (gw) gw[widx] += acc;
                             }
                         }
                       }
                     }
                   });
}

Tensor maxpool2d(const Tensor& x) {
  require_rank("maxpool2d", x, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2 || W < 2) throw Error(ErrorKind::dimension, "maxpool2d needs H, W >= 2, got " + shape_string(x.shape()));
  const std::size_t OH = H / 2, OW = W / 2;
  std::vector<double> out(N * C * OH * OW);
  std::vector<std::size_t> arg(out.size());
  const auto in = x.data();
  for (std::size_t p = 0; p < N * C; ++p) {
    const std::size_t base = p * H * W;
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::size_t best = base + (2 * oh) * W + 2 * ow;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = base + (2 * oh + di) * W + 2 * ow + dj;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (p * OH + oh) * OW + ow;
        out[o] = in[best];
        arg[o] = best;
      }
  }
  return make_node({N, C, OH, OW}, std::move(out), {x}, "maxpool2d", [arg = std::move(arg)](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const double> class_weights) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  if (labels.size() != N) {
    throw Error(ErrorKind::dimension, "cross entropy: " + std::to_string(labels.size()) +
                                          " labels for " + std::to_string(N) + " rows");
  }
  if (class_weights.size() != C) {
    throw Error(ErrorKind::dimension, "cross entropy: " + std::to_string(class_weights.size()) +
                                          " class weights for " + std::to_string(C) + " classes");
  }
  std::vector<double> prob(N * C);
  const auto z = logits.data();
  double loss = 0.0;
  double weight_total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw Error(ErrorKind::dimension, "cross entropy: label " + std::to_string(y) + " out of range");
    }
    const double* row = z.data() + n * C;
    const double zmax = *std::max_element(row, row + C);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) denom += std::exp(row[c] - zmax);
    for (std::size_t c = 0; c < C; ++c) prob[n * C + c] = std::exp(row[c] - zmax) / denom;
    const double w = class_weights[static_cast<std::size_t>(y)];
    loss += w * -(row[y] - zmax - std::log(denom));
    weight_total += w;
  }
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<double> wts(class_weights.begin(), class_weights.end());
  return make_node({}, {loss / weight_total}, {logits}, "softmax_cross_entropy",
                   [prob = std::move(prob), lab = std::move(lab), wts = std::move(wts), N, C,
                    weight_total](Node& self) {
                     Node& p = *self.parents[0];
                     auto& g = p.ensure_grad();
                     for (std::size_t n = 0; n < N; ++n) {
                       const auto y = static_cast<std::size_t>(lab[n]);
                       const double s = self.grad[0] * wts[y] / weight_total;
                       for (std::size_t c = 0; c < C; ++c) {
                         g[n * C + c] += s * (prob[n * C + c] - (c == y ? 1.0 : 0.0));
                       }
                     }
                   });
}

// ---------------------------------------------------------------------------
// Backward, gradient check, Adam

std::size_t backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error(ErrorKind::rank, "backward needs a scalar loss, got " +
                                     (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  Node* root = loss.node();
  if (!root->requires_grad) throw Error(ErrorKind::rank, "backward on a loss without lineage");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  std::size_t visited = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() == node->value.size()) {
      node->backward(*node);
      ++visited;
    }
  }
  return visited;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor probe = Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  Tensor y = f(probe);
  backward(y);
  const std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  double worst = 0.0;
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f(probe.detach()).item();
    values[i] = saved - eps;
    const double down = f(probe.detach()).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

AdamState AdamState::for_parameters(const std::vector<Tensor>& params, AdamConfig hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.numel(), 0.0);
    s.second_moment.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.first_moment.size() != params.size()) {
    throw Error(ErrorKind::dimension, "adam state does not match the parameter list");
  }
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].mutable_data();
    if (!params[k].has_grad()) continue;
    const auto grad = params[k].grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != value.size()) throw Error(ErrorKind::dimension, "adam moment shape mismatch");
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grad[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

}  // namespace dasphys::ad
