#include "ssrl/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace ssrl::metrics {

namespace {
constexpr double kDenomEps = 1e-12;

void check_pair(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw ShapeError("ccc: length mismatch " + std::to_string(y.size()) + " vs " +
                     std::to_string(yhat.size()));
  if (y.size() < 2) throw TooShort("ccc: need at least 2 samples");
}
}  // namespace

CccResult ccc(const std::vector<double>& y, const std::vector<double>& yhat) {
  check_pair(y, yhat);
  std::size_t n = y.size();
  CccResult r;
  for (std::size_t i = 0; i < n; ++i) {
    r.mu_y += y[i];
    r.mu_yhat += yhat[i];
  }
  r.mu_y /= static_cast<double>(n);
  r.mu_yhat /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dy = y[i] - r.mu_y;
    double dh = yhat[i] - r.mu_yhat;
    r.var_y += dy * dy;
    r.var_yhat += dh * dh;
    r.cov += dy * dh;
  }
  r.var_y /= static_cast<double>(n);
  r.var_yhat /= static_cast<double>(n);
  r.cov /= static_cast<double>(n);
  double md = r.mu_y - r.mu_yhat;
  double denom = r.var_y + r.var_yhat + md * md;
  r.ccc = denom < kDenomEps ? 0.0 : 2.0 * r.cov / denom;
  return r;
}

double ccc_loss(const std::vector<double>& y, const std::vector<double>& yhat) {
  return 1.0 - (ccc(y, yhat).ccc + 1.0) / 2.0;
}

nn::VarPtr ccc_loss_var(const std::vector<double>& y, const nn::VarPtr& yhat) {
  using namespace nn;
  std::size_t n = yhat->value.size();
  if (y.size() != n) throw ShapeError("ccc_loss_var: length mismatch");
  if (n < 2) throw TooShort("ccc_loss_var: need at least 2 samples");
  VarPtr yh = yhat->value.rows == 1 ? yhat : reshape(yhat, 1, n);

  Tensor yt(1, n);
  std::copy(y.begin(), y.end(), yt.data.begin());
  VarPtr yv = constant(yt);

  VarPtr mu_y = mean_all(yv);
  VarPtr mu_h = mean_all(yh);
  VarPtr dy = sub_scalar(yv, mu_y);
  VarPtr dh = sub_scalar(yh, mu_h);
  VarPtr var_y = mean_all(mul(dy, dy));
  VarPtr var_h = mean_all(mul(dh, dh));
  VarPtr cov = mean_all(mul(dy, dh));
  VarPtr md = sub(mu_y, mu_h);
  VarPtr denom = add(add(var_y, var_h), mul(md, md));
  if (denom->value.item() < kDenomEps) {
    // degenerate pair: ccc defined as 0, loss 0.5, no useful gradient
    return constant(Tensor::scalar(0.5));
  }
  VarPtr ccc_v = divide(scale(cov, 2.0), denom);
  // 1 - (ccc+1)/2
  return add_const(scale(ccc_v, -0.5), 0.5);
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  if (pred.empty()) throw TooShort("accuracy: empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                int n_classes) {
  if (pred.size() != truth.size()) throw ShapeError("macro_f1: length mismatch");
  if (n_classes < 1) throw LabelError("macro_f1: n_classes must be >= 1");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= n_classes || truth[i] < 0 || truth[i] >= n_classes)
      throw LabelError("macro_f1: label out of range at index " + std::to_string(i));
  }
  double acc = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    // class absent from both pred and truth contributes F1 = 0
    double f1 = (2 * tp + fp + fn) > 0
                    ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn)
                    : 0.0;
    acc += f1;
  }
  return acc / n_classes;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("paired_t_test: length mismatch");
  std::size_t n = a.size();
  if (n < 2) throw TooShort("paired_t_test: need at least 2 pairs");
  double mean_d = 0;
  for (std::size_t i = 0; i < n; ++i) mean_d += a[i] - b[i];
  mean_d /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean_d;
    ss += d * d;
  }
  double var_d = ss / static_cast<double>(n - 1);  // sample variance
  if (var_d < 1e-300) throw DegenerateTest("paired differences have zero variance");
  TTestResult r;
  r.t_stat = mean_d / std::sqrt(var_d / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(n - 1));
  r.p_value = 2.0 * boost::math::cdf(dist, -std::fabs(r.t_stat));
  return r;
}

RunReport summarize(const std::string& metric_name, const std::vector<double>& values) {
  RunReport r;
  r.metric_name = metric_name;
  r.values = values;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

}  // namespace ssrl::metrics
