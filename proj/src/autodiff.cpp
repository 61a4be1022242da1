#include "ssrl/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ssrl::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

ECMap emap(const Tensor& t) {
  return ECMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
               static_cast<Eigen::Index>(t.cols));
}

EMap emap(Tensor& t) {
  return EMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
              static_cast<Eigen::Index>(t.cols));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shapes [" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + "] vs [" + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + "]");
  }
}

VarPtr unary(const VarPtr& a, Tensor out,
             std::function<void(Node&, Node&)> back) {
  auto n = make_var(std::move(out));
  n->parents = {a};
  n->requires_grad = a->requires_grad;
  if (n->requires_grad) {
    n->backward_fn = [back](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      back(self, pa);
    };
  }
  return n;
}

VarPtr binary(const VarPtr& a, const VarPtr& b, Tensor out,
              std::function<void(Node&, Node&, Node&)> back) {
  auto n = make_var(std::move(out));
  n->parents = {a, b};
  n->requires_grad = a->requires_grad || b->requires_grad;
  if (n->requires_grad) {
    n->backward_fn = [back](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) pa.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      back(self, pa, pb);
    };
  }
  return n;
}

}  // namespace

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
  if (a->value.cols != b->value.rows) {
    throw ShapeError("matmul: inner dims " + std::to_string(a->value.cols) + " vs " +
                     std::to_string(b->value.rows));
  }
  Tensor out(a->value.rows, b->value.cols);
  emap(out) = emap(a->value) * emap(b->value);
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) emap(pa.grad) += emap(self.grad) * emap(pb.value).transpose();
    if (pb.requires_grad) emap(pb.grad) += emap(pa.value).transpose() * emap(self.grad);
  });
}

VarPtr add(const VarPtr& a, const VarPtr& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  emap(out) += emap(b->value);
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) emap(pa.grad) += emap(self.grad);
    if (pb.requires_grad) emap(pb.grad) += emap(self.grad);
  });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  emap(out) -= emap(b->value);
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) emap(pa.grad) += emap(self.grad);
    if (pb.requires_grad) emap(pb.grad) -= emap(self.grad);
  });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      if (pa.requires_grad) pa.grad.data[i] += self.grad.data[i] * pb.value.data[i];
      if (pb.requires_grad) pb.grad.data[i] += self.grad.data[i] * pa.value.data[i];
    }
  });
}

VarPtr divide(const VarPtr& a, const VarPtr& b) {
  check_same_shape(a->value, b->value, "divide");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= b->value.data[i];
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      double bv = pb.value.data[i];
      if (pa.requires_grad) pa.grad.data[i] += self.grad.data[i] / bv;
      if (pb.requires_grad)
        pb.grad.data[i] -= self.grad.data[i] * pa.value.data[i] / (bv * bv);
    }
  });
}

VarPtr add_rowvec(const VarPtr& a, const VarPtr& row) {
  if (row->value.rows != 1 || row->value.cols != a->value.cols) {
    throw ShapeError("add_rowvec: row must be [1 x cols(a)]");
  }
  Tensor out = a->value;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) += row->value.data[c];
  return binary(a, row, std::move(out), [](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) emap(pa.grad) += emap(self.grad);
    if (pb.requires_grad) {
      for (std::size_t r = 0; r < self.grad.rows; ++r)
        for (std::size_t c = 0; c < self.grad.cols; ++c)
          pb.grad.data[c] += self.grad.at(r, c);
    }
  });
}

VarPtr scale(const VarPtr& a, double c) {
  Tensor out = a->value;
  for (double& v : out.data) v *= c;
  return unary(a, std::move(out), [c](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      pa.grad.data[i] += c * self.grad.data[i];
  });
}

VarPtr add_const(const VarPtr& a, double c) {
  Tensor out = a->value;
  for (double& v : out.data) v += c;
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    emap(pa.grad) += emap(self.grad);
  });
}

VarPtr sub_scalar(const VarPtr& a, const VarPtr& s) {
  if (s->value.size() != 1) throw ShapeError("sub_scalar: s must be [1x1]");
  Tensor out = a->value;
  double sv = s->value.data[0];
  for (double& v : out.data) v -= sv;
  return binary(a, s, std::move(out), [](Node& self, Node& pa, Node& pb) {
    if (pa.requires_grad) emap(pa.grad) += emap(self.grad);
    if (pb.requires_grad) {
      double acc = 0;
      for (double g : self.grad.data) acc += g;
      pb.grad.data[0] -= acc;
    }
  });
}

VarPtr mul_scalar(const VarPtr& a, const VarPtr& s) {
  if (s->value.size() != 1) throw ShapeError("mul_scalar: s must be [1x1]");
  Tensor out = a->value;
  double sv = s->value.data[0];
  for (double& v : out.data) v *= sv;
  return binary(a, s, std::move(out), [](Node& self, Node& pa, Node& pb) {
    double sv = pb.value.data[0];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.data.size(); ++i)
        pa.grad.data[i] += sv * self.grad.data[i];
    if (pb.requires_grad) {
      double acc = 0;
      for (std::size_t i = 0; i < self.grad.data.size(); ++i)
        acc += self.grad.data[i] * pa.value.data[i];
      pb.grad.data[0] += acc;
    }
  });
}

VarPtr sigmoid(const VarPtr& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      double y = self.value.data[i];
      pa.grad.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  });
}

VarPtr tanh_act(const VarPtr& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::tanh(v);
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      double y = self.value.data[i];
      pa.grad.data[i] += self.grad.data[i] * (1.0 - y * y);
    }
  });
}

VarPtr relu(const VarPtr& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      if (self.value.data[i] > 0.0) pa.grad.data[i] += self.grad.data[i];
  });
}

VarPtr abs_act(const VarPtr& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::fabs(v);
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
      double x = pa.value.data[i];
      double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      pa.grad.data[i] += s * self.grad.data[i];
    }
  });
}

VarPtr sqrt_act(const VarPtr& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::sqrt(v);
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      pa.grad.data[i] += self.grad.data[i] / (2.0 * self.value.data[i]);
  });
}

VarPtr sum_all(const VarPtr& a) {
  double acc = 0;
  for (double v : a->value.data) acc += v;
  return unary(a, Tensor::scalar(acc), [](Node& self, Node& pa) {
    double g = self.grad.data[0];
    for (double& v : pa.grad.data) v += g;
  });
}

VarPtr mean_all(const VarPtr& a) {
  double n = static_cast<double>(a->value.size());
  double acc = 0;
  for (double v : a->value.data) acc += v;
  return unary(a, Tensor::scalar(acc / n), [n](Node& self, Node& pa) {
    double g = self.grad.data[0] / n;
    for (double& v : pa.grad.data) v += g;
  });
}

VarPtr reshape(const VarPtr& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a->value.size()) throw ShapeError("reshape: element count mismatch");
  Tensor out(rows, cols);
  out.data = a->value.data;
  return unary(a, std::move(out), [](Node& self, Node& pa) {
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      pa.grad.data[i] += self.grad.data[i];
  });
}

VarPtr concat_cols(const VarPtr& a, const VarPtr& b) {
  if (a->value.rows != b->value.rows)
    throw ShapeError("concat_cols: row counts differ");
  Tensor out(a->value.rows, a->value.cols + b->value.cols);
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < a->value.cols; ++c) out.at(r, c) = a->value.at(r, c);
    for (std::size_t c = 0; c < b->value.cols; ++c)
      out.at(r, a->value.cols + c) = b->value.at(r, c);
  }
  return binary(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
    std::size_t ac = pa.value.cols;
    for (std::size_t r = 0; r < self.grad.rows; ++r) {
      if (pa.requires_grad)
        for (std::size_t c = 0; c < ac; ++c) pa.grad.at(r, c) += self.grad.at(r, c);
      if (pb.requires_grad)
        for (std::size_t c = 0; c < pb.value.cols; ++c)
          pb.grad.at(r, c) += self.grad.at(r, ac + c);
    }
  });
}

VarPtr concat_rows(const std::vector<VarPtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  std::size_t cols = parts[0]->value.cols;
  std::size_t rows = 0;
  bool grad = false;
  for (const auto& p : parts) {
    if (p->value.cols != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p->value.rows;
    grad = grad || p->requires_grad;
  }
  Tensor out(rows, cols);
  std::size_t r0 = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(r0 * cols));
    r0 += p->value.rows;
  }
  auto n = make_var(std::move(out));
  n->parents = parts;
  n->requires_grad = grad;
  if (grad) {
    n->backward_fn = [](Node& self) {
      std::size_t r0 = 0;
      std::size_t cols = self.value.cols;
      for (auto& pp : self.parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          p.ensure_grad();
          for (std::size_t i = 0; i < p.value.size(); ++i)
            p.grad.data[i] += self.grad.data[r0 * cols + i];
        }
        r0 += p.value.rows;
      }
    };
  }
  return n;
}

VarPtr slice_cols(const VarPtr& a, std::size_t c0, std::size_t c1) {
  if (c1 > a->value.cols || c0 >= c1) throw ShapeError("slice_cols: bad range");
  Tensor out(a->value.rows, c1 - c0);
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) = a->value.at(r, c0 + c);
  return unary(a, std::move(out), [c0](Node& self, Node& pa) {
    for (std::size_t r = 0; r < self.grad.rows; ++r)
      for (std::size_t c = 0; c < self.grad.cols; ++c)
        pa.grad.at(r, c0 + c) += self.grad.at(r, c);
  });
}

VarPtr slice_rows(const VarPtr& a, std::size_t r0, std::size_t r1) {
  if (r1 > a->value.rows || r0 >= r1) throw ShapeError("slice_rows: bad range");
  Tensor out(r1 - r0, a->value.cols);
  std::copy(a->value.data.begin() + static_cast<std::ptrdiff_t>(r0 * a->value.cols),
            a->value.data.begin() + static_cast<std::ptrdiff_t>(r1 * a->value.cols),
            out.data.begin());
  return unary(a, std::move(out), [r0](Node& self, Node& pa) {
    std::size_t cols = self.grad.cols;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad.data[r0 * cols + i] += self.grad.data[i];
  });
}

VarPtr softmax_cross_entropy(const VarPtr& logits, std::size_t target) {
  if (logits->value.rows != 1) throw ShapeError("softmax_cross_entropy: logits must be [1xK]");
  std::size_t k = logits->value.cols;
  if (target >= k) throw ShapeError("softmax_cross_entropy: target out of range");
  double mx = *std::max_element(logits->value.data.begin(), logits->value.data.end());
  double denom = 0;
  for (double v : logits->value.data) denom += std::exp(v - mx);
  double lse = mx + std::log(denom);
  double loss = lse - logits->value.data[target];
  return unary(logits, Tensor::scalar(loss), [target, mx, denom](Node& self, Node& pa) {
    double g = self.grad.data[0];
    for (std::size_t j = 0; j < pa.value.cols; ++j) {
      double p = std::exp(pa.value.data[j] - mx) / denom;
      pa.grad.data[j] += g * (p - (j == target ? 1.0 : 0.0));
    }
  });
}

namespace {
std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                         std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}
}  // namespace

VarPtr conv2d(const VarPtr& input, const VarPtr& weight, const VarPtr& bias,
              std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad) {
  if (input->value.rows != cin || input->value.cols != h * w)
    throw ShapeError("conv2d: input must be [Cin x H*W]");
  std::size_t cout = weight->value.rows;
  if (weight->value.cols != cin * kh * kw) throw ShapeError("conv2d: weight shape");
  std::size_t ho = conv_out_dim(h, kh, stride, pad);
  std::size_t wo = conv_out_dim(w, kw, stride, pad);
  Tensor out(cout, ho * wo);
  const Tensor& x = input->value;
  const Tensor& wt = weight->value;
  for (std::size_t oc = 0; oc < cout; ++oc) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = bias->value.data[oc];
        for (std::size_t ic = 0; ic < cin; ++ic) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += x.at(ic, static_cast<std::size_t>(iy) * w +
                                  static_cast<std::size_t>(ix)) *
                     wt.at(oc, (ic * kh + ky) * kw + kx);
            }
          }
        }
        out.at(oc, oy * wo + ox) = acc;
      }
    }
  }
  auto n = make_var(std::move(out));
  n->parents = {input, weight, bias};
  n->requires_grad =
      input->requires_grad || weight->requires_grad || bias->requires_grad;
  if (n->requires_grad) {
    n->backward_fn = [cin, h, w, kh, kw, stride, pad, ho, wo](Node& self) {
      Node& xi = *self.parents[0];
      Node& wn = *self.parents[1];
      Node& bn = *self.parents[2];
      std::size_t cout = wn.value.rows;
      if (xi.requires_grad) xi.ensure_grad();
      if (wn.requires_grad) wn.ensure_grad();
      if (bn.requires_grad) bn.ensure_grad();
      for (std::size_t oc = 0; oc < cout; ++oc) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          for (std::size_t ox = 0; ox < wo; ++ox) {
            double g = self.grad.at(oc, oy * wo + ox);
            if (g == 0.0) continue;
            if (bn.requires_grad) bn.grad.data[oc] += g;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              for (std::size_t ky = 0; ky < kh; ++ky) {
                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  std::size_t xoff = static_cast<std::size_t>(iy) * w +
                                     static_cast<std::size_t>(ix);
                  std::size_t woff = (ic * kh + ky) * kw + kx;
                  if (wn.requires_grad)
                    wn.grad.at(oc, woff) += g * xi.value.at(ic, xoff);
                  if (xi.requires_grad)
                    xi.grad.at(ic, xoff) += g * wn.value.at(oc, woff);
                }
              }
            }
          }
        }
      }
    };
  }
  return n;
}

VarPtr conv_transpose2d(const VarPtr& input, const VarPtr& weight,
                        const VarPtr& bias, std::size_t cin, std::size_t h,
                        std::size_t w, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad) {
  if (input->value.rows != cin || input->value.cols != h * w)
    throw ShapeError("conv_transpose2d: input must be [Cin x H*W]");
  if (weight->value.rows != cin) throw ShapeError("conv_transpose2d: weight rows != Cin");
  std::size_t coutkk = weight->value.cols;
  if (coutkk % (kh * kw) != 0) throw ShapeError("conv_transpose2d: weight cols");
  std::size_t cout = coutkk / (kh * kw);
  std::size_t ho = (h - 1) * stride + kh - 2 * pad;
  std::size_t wo = (w - 1) * stride + kw - 2 * pad;
  Tensor out(cout, ho * wo);
  for (std::size_t oc = 0; oc < cout; ++oc)
    for (std::size_t i = 0; i < ho * wo; ++i) out.at(oc, i) = bias->value.data[oc];
  const Tensor& x = input->value;
  const Tensor& wt = weight->value;
  for (std::size_t ic = 0; ic < cin; ++ic) {
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        double xv = x.at(ic, iy * w + ix);
        if (xv == 0.0) continue;
        for (std::size_t oc = 0; oc < cout; ++oc) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
            if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(ho)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wo)) continue;
              out.at(oc, static_cast<std::size_t>(oy) * wo +
                             static_cast<std::size_t>(ox)) +=
                  xv * wt.at(ic, (oc * kh + ky) * kw + kx);
            }
          }
        }
      }
    }
  }
  auto n = make_var(std::move(out));
  n->parents = {input, weight, bias};
  n->requires_grad =
      input->requires_grad || weight->requires_grad || bias->requires_grad;
  if (n->requires_grad) {
    n->backward_fn = [cin, h, w, kh, kw, stride, pad, ho, wo, cout](Node& self) {
      Node& xi = *self.parents[0];
      Node& wn = *self.parents[1];
      Node& bn = *self.parents[2];
      if (xi.requires_grad) xi.ensure_grad();
      if (wn.requires_grad) wn.ensure_grad();
      if (bn.requires_grad) bn.ensure_grad();
      if (bn.requires_grad) {
        for (std::size_t oc = 0; oc < cout; ++oc) {
          double acc = 0;
          for (std::size_t i = 0; i < ho * wo; ++i) acc += self.grad.at(oc, i);
          bn.grad.data[oc] += acc;
        }
      }
      for (std::size_t ic = 0; ic < cin; ++ic) {
        for (std::size_t iy = 0; iy < h; ++iy) {
          for (std::size_t ix = 0; ix < w; ++ix) {
            std::size_t xoff = iy * w + ix;
            double xv = xi.value.at(ic, xoff);
            for (std::size_t oc = 0; oc < cout; ++oc) {
              for (std::size_t ky = 0; ky < kh; ++ky) {
                std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(ho)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wo)) continue;
                  double g = self.grad.at(oc, static_cast<std::size_t>(oy) * wo +
                                                  static_cast<std::size_t>(ox));
                  if (g == 0.0) continue;
                  std::size_t woff = (oc * kh + ky) * kw + kx;
                  if (wn.requires_grad) wn.grad.at(ic, woff) += g * xv;
                  if (xi.requires_grad)
                    xi.grad.at(ic, xoff) += g * wn.value.at(ic, woff);
                }
              }
            }
          }
        }
      }
    };
  }
  return n;
}

VarPtr batchnorm(const VarPtr& input, const VarPtr& gamma, const VarPtr& beta,
                 Tensor& running_mean, Tensor& running_var, bool training,
                 double momentum, double eps) {
  std::size_t c = input->value.rows;
  std::size_t s = input->value.cols;
  if (gamma->value.size() != c || beta->value.size() != c)
    throw ShapeError("batchnorm: gamma/beta must have one entry per channel");
  if (running_mean.size() != c || running_var.size() != c)
    throw ShapeError("batchnorm: running stats size");

  Tensor mean(1, c), var(1, c);
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double m = 0;
      for (std::size_t i = 0; i < s; ++i) m += input->value.at(ch, i);
      m /= static_cast<double>(s);
      double v = 0;
      for (std::size_t i = 0; i < s; ++i) {
        double d = input->value.at(ch, i) - m;
        v += d * d;
      }
      v /= static_cast<double>(s);
      mean.data[ch] = m;
      var.data[ch] = v;
      running_mean.data[ch] = (1.0 - momentum) * running_mean.data[ch] + momentum * m;
      running_var.data[ch] = (1.0 - momentum) * running_var.data[ch] + momentum * v;
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  Tensor out(c, s);
  Tensor inv_std(1, c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    inv_std.data[ch] = 1.0 / std::sqrt(var.data[ch] + eps);
    for (std::size_t i = 0; i < s; ++i) {
      double xh = (input->value.at(ch, i) - mean.data[ch]) * inv_std.data[ch];
      out.at(ch, i) = gamma->value.data[ch] * xh + beta->value.data[ch];
    }
  }

  auto n = make_var(std::move(out));
  n->parents = {input, gamma, beta};
  n->requires_grad =
      input->requires_grad || gamma->requires_grad || beta->requires_grad;
  if (n->requires_grad) {
    n->backward_fn = [mean, inv_std, training](Node& self) {
      Node& xi = *self.parents[0];
      Node& gn = *self.parents[1];
      Node& bn = *self.parents[2];
      std::size_t c = xi.value.rows;
      std::size_t s = xi.value.cols;
      if (xi.requires_grad) xi.ensure_grad();
      if (gn.requires_grad) gn.ensure_grad();
      if (bn.requires_grad) bn.ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        double istd = inv_std.data[ch];
        double m = mean.data[ch];
        double gsum = 0, gxsum = 0;
        for (std::size_t i = 0; i < s; ++i) {
          double g = self.grad.at(ch, i);
          double xh = (xi.value.at(ch, i) - m) * istd;
          gsum += g;
          gxsum += g * xh;
          if (gn.requires_grad) gn.grad.data[ch] += g * xh;
          if (bn.requires_grad) bn.grad.data[ch] += g;
        }
        if (xi.requires_grad) {
          double gamma_v = gn.value.data[ch];
          if (training) {
            double ns = static_cast<double>(s);
            for (std::size_t i = 0; i < s; ++i) {
              double g = self.grad.at(ch, i);
              double xh = (xi.value.at(ch, i) - m) * istd;
              xi.grad.at(ch, i) +=
                  gamma_v * istd * (g - gsum / ns - xh * gxsum / ns);
            }
          } else {
            for (std::size_t i = 0; i < s; ++i)
              xi.grad.at(ch, i) += gamma_v * istd * self.grad.at(ch, i);
          }
        }
      }
    };
  }
  return n;
}

void backward(const VarPtr& loss) {
  if (loss->value.size() != 1) throw ShapeError("backward: loss must be scalar");
  // topological order by iterative DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss->ensure_grad();
  loss->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

}  // namespace ssrl::nn
