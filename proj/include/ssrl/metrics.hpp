#pragma once

// Evaluation metrics and metric-derived losses: concordance correlation
// coefficient (with its training loss), macro-F1, accuracy, paired t-test.

#include <vector>

#include "ssrl/autodiff.hpp"
#include "ssrl/common.hpp"

namespace ssrl::metrics {

struct CccResult {
  double ccc = 0;
  double mu_y = 0, mu_yhat = 0;
  double var_y = 0, var_yhat = 0;
  double cov = 0;
};

// CCC with biased (1/n) moments; near-zero denominator maps to ccc = 0.
CccResult ccc(const std::vector<double>& y, const std::vector<double>& yhat);

// 1 - ((CCC+1)/2), in [0, 1]
double ccc_loss(const std::vector<double>& y, const std::vector<double>& yhat);

// Differentiable CCC loss: yhat is a length-n graph variable (any shape), y fixed.
nn::VarPtr ccc_loss_var(const std::vector<double>& y, const nn::VarPtr& yhat);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);
double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes);

struct TTestResult {
  double t_stat = 0;
  double p_value = 1;
};

// two-sided paired t-test, n-1 degrees of freedom
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct RunReport {
  std::string metric_name;
  std::vector<double> values;
  double mean = 0;
  double stddev = 0;  // population std
};

RunReport summarize(const std::string& metric_name, const std::vector<double>& values);

}  // namespace ssrl::metrics
