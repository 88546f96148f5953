#pragma once

// Multinomial (softmax) logistic regression trained by full-batch gradient
// descent with a backtracking line search.
//
// Objective, for n examples, K classes and weights W of shape (d+1) x K whose
// last row is the bias:
//
//   L(W) = -(1/n) sum_i log softmax(x_i W)[y_i] + (l2 / 2n) ||W[0:d, :]||^2

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "features.hpp"

namespace entail {

struct LogisticOptions {
  double l2 = 1.0;
  int max_iter = 500;
  double tol = 1e-6;  // stop when the gradient's max-norm drops below this
};

struct LogisticModel {
  Eigen::MatrixXd weights;          // (d+1) x K, bias in the last row
  std::vector<double> loss_history;  // loss at the start and after every accepted step
  int iterations = 0;
  bool converged = false;

  // Row-wise class probabilities for an n x d feature matrix.
  Eigen::MatrixXd predict_proba(const FeatureMatrix& x) const;
  std::vector<int> predict(const FeatureMatrix& x) const;
};

namespace detail {

inline Eigen::MatrixXd with_bias(const FeatureMatrix& x) {
  Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
  xb.leftCols(x.cols()) = x;
  xb.col(x.cols()).setOnes();
  return xb;
}

// In-place row softmax; returns the per-row log-sum-exp.
inline Eigen::VectorXd softmax_rows(Eigen::MatrixXd& z) {
  Eigen::VectorXd lse(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    const double s = z.row(i).sum();
    z.row(i) /= s;
    lse(i) = m + std::log(s);
  }
  return lse;
}

}  // namespace detail

inline Eigen::MatrixXd LogisticModel::predict_proba(const FeatureMatrix& x) const {
  Eigen::MatrixXd z = detail::with_bias(x) * weights;
  detail::softmax_rows(z);
  return z;
}

inline std::vector<int> LogisticModel::predict(const FeatureMatrix& x) const {
  const Eigen::MatrixXd p = predict_proba(x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < p.cols(); ++j)
      if (p(i, j) > p(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// Loss and gradient of the objective above. `xb` already carries the bias
// column. The gradient is written into `grad` (same shape as `w`).
inline double logistic_loss_and_gradient(const Eigen::MatrixXd& xb, std::span<const int> labels,
                                         const Eigen::MatrixXd& w, double l2, Eigen::MatrixXd* grad) {
  const auto n = static_cast<double>(xb.rows());
  const Eigen::Index d = xb.cols() - 1;
  const Eigen::MatrixXd z = xb * w;
  Eigen::MatrixXd p = z;
  const Eigen::VectorXd lse = detail::softmax_rows(p);

  double nll = 0.0;
  for (Eigen::Index i = 0; i < xb.rows(); ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    nll += lse(i) - z(i, y);
  }
  const auto penalized = w.topRows(d);
  const double loss = nll / n + l2 / (2.0 * n) * penalized.squaredNorm();

  if (grad) {
    for (Eigen::Index i = 0; i < xb.rows(); ++i) p(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    *grad = xb.transpose() * p / n;
    grad->topRows(d) += (l2 / n) * penalized;
  }
  return loss;
}

inline double logistic_loss(const FeatureMatrix& x, std::span<const int> labels, const Eigen::MatrixXd& w,
                            double l2, Eigen::MatrixXd* grad = nullptr) {
  return logistic_loss_and_gradient(detail::with_bias(x), labels, w, l2, grad);
}

inline LogisticModel fit_logistic(const FeatureMatrix& x, std::span<const int> labels, int num_classes,
                                  const LogisticOptions& opt = {}) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw UsageError("fit_logistic: " + std::to_string(x.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  if (num_classes < 1) throw UsageError("fit_logistic: need at least one class");
  if (x.rows() < num_classes)
    throw UsageError("fit_logistic: fewer examples than classes");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw UsageError("fit_logistic: label " + std::to_string(y) + " out of range");

  const Eigen::MatrixXd xb = detail::with_bias(x);
  LogisticModel model;
  model.weights = Eigen::MatrixXd::Zero(xb.cols(), num_classes);

  constexpr double armijo = 1e-4;
  Eigen::MatrixXd grad;
  double loss = logistic_loss_and_gradient(xb, labels, model.weights, opt.l2, &grad);
  if (!std::isfinite(loss)) throw DataError("fit_logistic: non-finite loss (check features)");
  model.loss_history.push_back(loss);

  double step = 1.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < opt.tol) {
      model.converged = true;
      break;
    }
    const double g2 = grad.squaredNorm();
    Eigen::MatrixXd trial;
    double trial_loss = 0.0;
    for (;;) {
      trial = model.weights - step * grad;
      trial_loss = logistic_loss_and_gradient(xb, labels, trial, opt.l2, nullptr);
      if (std::isfinite(trial_loss) && trial_loss <= loss - armijo * step * g2) break;
      step *= 0.5;
      if (step < 1e-20) break;
    }
    if (!(trial_loss < loss)) break;  // line search exhausted
    model.weights = std::move(trial);
    loss = logistic_loss_and_gradient(xb, labels, model.weights, opt.l2, &grad);
    model.loss_history.push_back(loss);
    model.iterations = it + 1;
    step *= 2.0;
  }
  if (grad.lpNorm<Eigen::Infinity>() < opt.tol) model.converged = true;
  return model;
}

}  // namespace entail
