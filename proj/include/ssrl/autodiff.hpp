#pragma once

// Reverse-mode automatic differentiation over dense 2-D double tensors.
// Small dynamic tape: each forward op records a closure that scatters the
// output gradient into its parents. All model components are composed from
// these primitives, so analytic gradients come for free and can be checked
// against central finite differences.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssrl/common.hpp"

namespace ssrl::nn {

// Row-major [rows x cols] matrix of doubles. Higher-rank data (images,
// videos) is carried as [channels x height*width] with the spatial geometry
// passed alongside.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
  static Tensor full(std::size_t r, std::size_t c, double v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  std::size_t size() const { return rows * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor");
    return data[0];
  }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

struct Node;
using VarPtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  std::vector<VarPtr> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' grads
  bool requires_grad = false;

  explicit Node(Tensor v) : value(std::move(v)) {}

  void ensure_grad() {
    if (grad.size() != value.size() || grad.rows != value.rows) {
      grad = Tensor::zeros(value.rows, value.cols);
    }
  }
};

inline VarPtr make_var(Tensor v, bool requires_grad = false) {
  auto n = std::make_shared<Node>(std::move(v));
  n->requires_grad = requires_grad;
  return n;
}

inline VarPtr constant(Tensor v) { return make_var(std::move(v), false); }

// --- graph primitives -------------------------------------------------------

VarPtr matmul(const VarPtr& a, const VarPtr& b);
VarPtr add(const VarPtr& a, const VarPtr& b);                 // same shape
VarPtr sub(const VarPtr& a, const VarPtr& b);                 // same shape
VarPtr mul(const VarPtr& a, const VarPtr& b);                 // elementwise
VarPtr divide(const VarPtr& a, const VarPtr& b);              // elementwise
VarPtr add_rowvec(const VarPtr& a, const VarPtr& row);        // [t x n] + [1 x n]
VarPtr scale(const VarPtr& a, double c);
VarPtr add_const(const VarPtr& a, double c);

// scalar ([1x1]) broadcast against a matrix
VarPtr sub_scalar(const VarPtr& a, const VarPtr& s);
VarPtr mul_scalar(const VarPtr& a, const VarPtr& s);

VarPtr sigmoid(const VarPtr& a);
VarPtr tanh_act(const VarPtr& a);
VarPtr relu(const VarPtr& a);
VarPtr abs_act(const VarPtr& a);
VarPtr sqrt_act(const VarPtr& a);  // elementwise; requires positive inputs

VarPtr sum_all(const VarPtr& a);   // -> [1x1]
VarPtr mean_all(const VarPtr& a);  // -> [1x1]

// same element count, gradient passes through (row-major layout preserved)
VarPtr reshape(const VarPtr& a, std::size_t rows, std::size_t cols);

VarPtr concat_cols(const VarPtr& a, const VarPtr& b);
VarPtr concat_rows(const std::vector<VarPtr>& parts);
VarPtr slice_cols(const VarPtr& a, std::size_t c0, std::size_t c1);
VarPtr slice_rows(const VarPtr& a, std::size_t r0, std::size_t r1);

// cross entropy of softmax(logits) against a single target index;
// logits is [1 x K]
VarPtr softmax_cross_entropy(const VarPtr& logits, std::size_t target);

// 2-D convolution on [Cin x Hin*Win] input, weight [Cout x Cin*kh*kw],
// bias [1 x Cout]; zero padding, square stride.
VarPtr conv2d(const VarPtr& input, const VarPtr& weight, const VarPtr& bias,
              std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad);

// transposed convolution; weight [Cin x Cout*kh*kw]
VarPtr conv_transpose2d(const VarPtr& input, const VarPtr& weight,
                        const VarPtr& bias, std::size_t cin, std::size_t h,
                        std::size_t w, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad);

// Per-channel batch normalization over spatial positions of a [C x S] map.
// In training mode uses batch statistics and updates the running buffers;
// in inference mode uses the running buffers only.
VarPtr batchnorm(const VarPtr& input, const VarPtr& gamma, const VarPtr& beta,
                 Tensor& running_mean, Tensor& running_var, bool training,
                 double momentum = 0.1, double eps = 1e-5);

// Runs reverse-mode accumulation from a scalar loss.
void backward(const VarPtr& loss);

}  // namespace ssrl::nn
