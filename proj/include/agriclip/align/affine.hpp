#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agriclip/numerics/tensor.hpp"

namespace agriclip::align {

// z -> z W + b from the fine-grained feature space (d_s) into the semantic
// space (d_c).
struct AffineMap {
  Tensor<double> weight;  // d_s x d_c
  Tensor<double> bias;    // d_c
  double lambda = 0.0;
  double fit_mse = 0.0;   // (1/N) ||X W + 1 b^T - Y||_F^2 on the fitting data

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  Tensor<double> apply(std::span<const double> x) const {
    if (x.size() != in_dim())
      throw ParameterError("AffineMap: feature dim " + std::to_string(x.size()) + " != " + std::to_string(in_dim()));
    Tensor<double> out({out_dim()});
    for (std::size_t j = 0; j < out_dim(); ++j) out[j] = bias[j];
    for (std::size_t i = 0; i < in_dim(); ++i)
      for (std::size_t j = 0; j < out_dim(); ++j) out[j] += x[i] * weight(i, j);
    return out;
  }
};

namespace detail {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const MatrixRM> as_eigen(const Tensor<double>& t) {
  return Eigen::Map<const MatrixRM>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                                    static_cast<Eigen::Index>(t.cols()));
}

inline Tensor<double> from_eigen(const MatrixRM& m) {
  Tensor<double> t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<MatrixRM>(t.data().data(), m.rows(), m.cols()) = m;
  return t;
}

inline void check_xy(const Tensor<double>& x, const Tensor<double>& y, const char* who) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw ParameterError(std::string(who) + ": X and Y must be matrices with the same row count");
  require_finite(x, who);
  require_finite(y, who);
}

}  // namespace detail

// Unregularised fit term (1/N) ||X W + 1 b^T - Y||_F^2.
inline double affine_mse(const Tensor<double>& x, const Tensor<double>& y, const Tensor<double>& w,
                         const Tensor<double>& b) {
  const auto X = detail::as_eigen(x);
  const auto Y = detail::as_eigen(y);
  const auto W = detail::as_eigen(w);
  const Eigen::Map<const Eigen::RowVectorXd> B(b.data().data(), static_cast<Eigen::Index>(b.size()));
  const detail::MatrixRM r = (X * W).rowwise() + B - Y;
  return r.squaredNorm() / static_cast<double>(x.rows());
}

// Full objective (1/N) ||X W + 1 b^T - Y||_F^2 + lambda ||W||_F^2.
inline double affine_objective(const Tensor<double>& x, const Tensor<double>& y, const Tensor<double>& w,
                               const Tensor<double>& b, double lambda) {
  return affine_mse(x, y, w, b) + lambda * detail::as_eigen(w).squaredNorm();
}

struct AffineGradient {
  Tensor<double> weight;
  Tensor<double> bias;
};

// d/dW = (2/N) X^T R + 2 lambda W, d/db = (2/N) 1^T R with R = X W + 1 b^T - Y.
inline AffineGradient affine_objective_gradient(const Tensor<double>& x, const Tensor<double>& y,
                                                const Tensor<double>& w, const Tensor<double>& b, double lambda) {
  const auto X = detail::as_eigen(x);
  const auto Y = detail::as_eigen(y);
  const auto W = detail::as_eigen(w);
  const Eigen::Map<const Eigen::RowVectorXd> B(b.data().data(), static_cast<Eigen::Index>(b.size()));
  const double n = static_cast<double>(x.rows());
  const detail::MatrixRM r = (X * W).rowwise() + B - Y;
  const detail::MatrixRM gw = (2.0 / n) * X.transpose() * r + 2.0 * lambda * W;
  const Eigen::RowVectorXd gb = (2.0 / n) * r.colwise().sum();
  AffineGradient g{detail::from_eigen(gw), Tensor<double>({b.size()})};
  for (Eigen::Index j = 0; j < gb.size(); ++j) g.bias[static_cast<std::size_t>(j)] = gb(j);
  return g;
}

// Closed form via the centred normal equations:
//   b = ybar - xbar W,  W = (Xc^T Xc + N lambda I)^-1 Xc^T Yc.
inline AffineMap fit_affine_ridge(const Tensor<double>& x, const Tensor<double>& y, double lambda) {
  detail::check_xy(x, y, "fit_affine_ridge");
  if (!(lambda >= 0.0)) throw ParameterError("fit_affine_ridge: lambda must be >= 0");
  const auto n = static_cast<double>(x.rows());
  const auto X = detail::as_eigen(x);
  const auto Y = detail::as_eigen(y);
  const Eigen::RowVectorXd xbar = X.colwise().mean();
  const Eigen::RowVectorXd ybar = Y.colwise().mean();
  const detail::MatrixRM xc = X.rowwise() - xbar;
  const detail::MatrixRM yc = Y.rowwise() - ybar;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += n * lambda;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const auto d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * std::max(dmax, 1e-300))) {
    throw NumericalError("fit_affine_ridge: normal equations are singular" +
                         std::string(lambda == 0.0 ? "; use lambda > 0" : ""));
  }
  const detail::MatrixRM w = ldlt.solve(xc.transpose() * yc);
  const Eigen::RowVectorXd b = ybar - xbar * w;

  AffineMap map;
  map.weight = detail::from_eigen(w);
  map.bias = Tensor<double>({static_cast<std::size_t>(b.size())});
  for (Eigen::Index j = 0; j < b.size(); ++j) map.bias[static_cast<std::size_t>(j)] = b(j);
  map.lambda = lambda;
  map.fit_mse = affine_mse(x, y, map.weight, map.bias);
  return map;
}

// Lipschitz constant of the W-gradient: 2 (sigma_max(Xc)^2 / N + lambda).
inline double affine_lipschitz(const Tensor<double>& x, double lambda) {
  const auto X = detail::as_eigen(x);
  const detail::MatrixRM xc = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return 2.0 * (es.eigenvalues().maxCoeff() / static_cast<double>(x.rows()) + lambda);
}

struct SgdFit {
  AffineMap map;
  std::vector<double> trace;  // objective before the first step, then after every step
};

// Full-batch gradient descent on the ridge objective, in centred
// coordinates X W + 1 c^T with c = b + xbar W. There the objective separates
// into a W block and a c block; the c block (curvature 2, minimiser ybar) is
// solved exactly, the W block takes gradient steps of size lr < 2 / L.
inline SgdFit fit_affine_sgd(const Tensor<double>& x, const Tensor<double>& y, double lr, std::size_t steps,
                             double lambda, const std::optional<AffineMap>& init = std::nullopt) {
  detail::check_xy(x, y, "fit_affine_sgd");
  if (!(lambda >= 0.0)) throw ParameterError("fit_affine_sgd: lambda must be >= 0");
  const double lip = affine_lipschitz(x, lambda);
  if (!(lr > 0.0 && lr < 2.0 / lip)) {
    throw ConfigError("fit_affine_sgd: learning rate " + std::to_string(lr) + " violates lr < 2/L = " +
                      std::to_string(2.0 / lip));
  }
  const auto n = static_cast<double>(x.rows());
  const auto X = detail::as_eigen(x);
  const auto Y = detail::as_eigen(y);
  const Eigen::RowVectorXd xbar = X.colwise().mean();
  const Eigen::RowVectorXd ybar = Y.colwise().mean();
  const detail::MatrixRM xc = X.rowwise() - xbar;
  const detail::MatrixRM yc = Y.rowwise() - ybar;
  const Eigen::MatrixXd gram = xc.transpose() * xc / n;
  const Eigen::MatrixXd cross = xc.transpose() * yc / n;

  detail::MatrixRM w = detail::MatrixRM::Zero(X.cols(), Y.cols());
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(Y.cols());
  if (init) {
    if (init->in_dim() != static_cast<std::size_t>(X.cols()) || init->out_dim() != static_cast<std::size_t>(Y.cols()))
      throw ParameterError("fit_affine_sgd: initial map has the wrong shape");
    w = detail::as_eigen(init->weight);
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = init->bias[static_cast<std::size_t>(j)];
  }

  auto objective = [&]() {
    const detail::MatrixRM r = (X * w).rowwise() + b - Y;
    return r.squaredNorm() / n + lambda * w.squaredNorm();
  };

  SgdFit fit;
  fit.trace.reserve(steps + 1);
  fit.trace.push_back(objective());
  for (std::size_t t = 0; t < steps; ++t) {
    const detail::MatrixRM grad = 2.0 * (gram * w - cross) + 2.0 * lambda * w;
    w -= lr * grad;
    b = ybar - xbar * w;
    fit.trace.push_back(objective());
  }
  fit.map.weight = detail::from_eigen(w);
  fit.map.bias = Tensor<double>({static_cast<std::size_t>(b.size())});
  for (Eigen::Index j = 0; j < b.size(); ++j) fit.map.bias[static_cast<std::size_t>(j)] = b(j);
  fit.map.lambda = lambda;
  fit.map.fit_mse = affine_mse(x, y, fit.map.weight, fit.map.bias);
  return fit;
}

}  // namespace agriclip::align
