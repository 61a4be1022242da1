#pragma once

// Shared test helpers: central finite-difference gradient checking against
// the analytic backward pass.

#include <cmath>
#include <functional>
#include <vector>

#include "ssrl/autodiff.hpp"

namespace ssrl::testutil {

// Max relative error between analytic gradients of loss_fn w.r.t. `vars`
// and central finite differences. loss_fn must rebuild the graph each call.
// `floor` bounds the relative-error denominator from below: gradient entries
// smaller than the finite-difference noise floor (~loss_eps / 2h) cannot be
// resolved by FD and would otherwise produce spurious relative errors.
inline double grad_check(const std::vector<nn::VarPtr>& vars,
                         const std::function<nn::VarPtr()>& loss_fn,
                         double h = 1e-5, double floor = 1e-8) {
  nn::VarPtr loss = loss_fn();
  nn::backward(loss);
  std::vector<nn::Tensor> analytic;
  for (const auto& v : vars) {
    v->ensure_grad();
    analytic.push_back(v->grad);
  }

  double worst = 0.0;
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    auto& v = vars[vi];
    for (std::size_t j = 0; j < v->value.size(); ++j) {
      double orig = v->value.data[j];
      v->value.data[j] = orig + h;
      double lp = loss_fn()->value.item();
      v->value.data[j] = orig - h;
      double lm = loss_fn()->value.item();
      v->value.data[j] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = analytic[vi].data[j];
      double denom = std::max({std::abs(fd), std::abs(an), floor});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
    // clear stale grads for the next loss_fn() rebuild
    std::fill(v->grad.data.begin(), v->grad.data.end(), 0.0);
  }
  return worst;
}

inline nn::VarPtr random_var(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  nn::Tensor t(r, c);
  for (auto& x : t.data) x = rng.uniform(-scale, scale);
  return nn::make_var(std::move(t), true);
}

}  // namespace ssrl::testutil
