#pragma once

// Reference computations that share no code path with the library: Taylor
// series exponentials, composite Simpson quadrature, scalar closed forms and
// central differences.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;

/// e^M by scaling and squaring around a plain Taylor sum.
inline Mat taylor_expm(const Mat& M, int terms = 60) {
  const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.5) ++squarings;
  const Mat S = M / std::pow(2.0, squarings);
  Mat term = Mat::Identity(M.rows(), M.cols());
  Mat sum = term;
  for (int k = 1; k < terms; ++k) {
    term = term * S / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

/// int_0^t e^{A^T s} W e^{A s} ds by composite Simpson with `panels` panels.
inline Mat simpson_gramian(const Mat& A, const Mat& W, double t, int panels = 2000) {
  if (panels % 2) ++panels;
  const double h = t / panels;
  const Mat step = taylor_expm(A * h);
  Mat phi = Mat::Identity(A.rows(), A.cols());
  Mat sum = Mat::Zero(A.rows(), A.cols());
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * phi.transpose() * W * phi;
    phi = phi * step;
  }
  return sum * h / 3.0;
}

/// Scalar plant x' = a x + b u, y = c x, u = -k y with weights q, r, rho:
///   f(k) = rho c^2 (q + r k^2) / (2 (b k c - a)).
struct Scalar {
  double a = -1.0, b = 1.0, c = 1.0, q = 1.0, r = 1.0, sigma = 1.0;

  double closed_loop(double k) const { return a - b * k * c; }
  double value(double k) const { return c * c * (q + r * k * k) / (-2.0 * closed_loop(k)); }
  double cost(double k) const { return value(k) * sigma; }
  double gramian(double k) const { return sigma / (-2.0 * closed_loop(k)); }
  double gradient(double k) const {
    return 2.0 * (r * k * c - b * value(k)) * gramian(k) * c;
  }
  double truncated_value(double k, double tau) const {
    return value(k) * (1.0 - std::exp(2.0 * closed_loop(k) * tau));
  }
};

/// Central difference of a matrix function.
inline Mat central_difference(const std::function<double(const Mat&)>& f, const Mat& K, double h) {
  Mat g(K.rows(), K.cols());
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      Mat E = Mat::Zero(K.rows(), K.cols());
      E(i, j) = h;
      g(i, j) = (f(K + E) - f(K - E)) / (2.0 * h);
    }
  return g;
}

}  // namespace oracle
