#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dasphys::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

// Handle to a value node in a dynamically recorded computation graph. Copies
// share the node. Operations record lineage only when an input requires grad.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access; only meaningful on leaves (parameter updates).
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;
  bool requires_grad() const;
  double item() const;

  void zero_grad();
  // Leaf copy of the value with no lineage.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_node(Shape, std::vector<double>, std::vector<Tensor>, const char*,
                          std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<double>& ensure_grad();
};

// Builds a result node; `backward` is dropped when no parent requires grad.
Tensor make_node(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                 const char* op, std::function<void(Node&)> backward);

// Elementwise; operands must share a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis(const Tensor& x, std::size_t axis);  // keeps the axis with extent 1
Tensor sum_axis(const Tensor& x, std::size_t axis);
// Repeats extent-1 axes up to `shape`.
Tensor broadcast_to(const Tensor& x, const Shape& shape);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor transpose(const Tensor& x);  // rank-2 only

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]

// NCHW input, weight [out, in, kh, kw], bias [out] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);
// NCHW input, weight [in, out, kh, kw]; output extent (H - 1) * stride + kh.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride);
// 2x2 window, stride 2; gradient routes to the first maximal element.
Tensor maxpool2d(const Tensor& x);

// Weighted mean of -log softmax(logits)[label]; logits [N, C].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const double> class_weights);

// Reverse-topological accumulation from a scalar; returns the number of nodes
// whose backward ran (each at most once).
std::size_t backward(const Tensor& loss);

// Worst component-wise |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// against central differences of f at x.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
  AdamConfig hyper;

  static AdamState for_parameters(const std::vector<Tensor>& params, AdamConfig hyper);
};

// Bias-corrected Adam update of every parameter from its accumulated grad.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace dasphys::ad
