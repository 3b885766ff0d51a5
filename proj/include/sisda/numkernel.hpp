#pragma once

// Dense least-squares machinery and the scalar quadratic-inequality calculus
// shared by the transport, selection and inference layers.

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sisda/interval_set.hpp"

namespace sisda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sorted list of 0-based column indices.
using FeatureSet = std::vector<int>;

/// Gram matrices with a reciprocal condition estimate below this are rejected.
inline constexpr double kRankThreshold = 1e-10;
/// Quadratic coefficients with magnitude below this are treated as zero.
inline constexpr double kCoeffTolerance = 1e-12;

class RankDeficiencyError : public std::runtime_error {
 public:
  explicit RankDeficiencyError(FeatureSet columns);
  const FeatureSet& columns() const noexcept { return columns_; }

 private:
  FeatureSet columns_;
};

std::string format_feature_set(const FeatureSet& set);

/// Columns of `X` listed in `cols`, in the given order.
Matrix select_columns(const Matrix& X, const FeatureSet& cols);

/// Least-squares solver for a fixed design. Factorises the Gram matrix once
/// and then projects any number of right-hand sides.
class LeastSquares {
 public:
  /// `columns` only labels the rank-deficiency error.
  explicit LeastSquares(const Matrix& XM, FeatureSet columns = {});

  /// (I - P_X) Y for every column of Y.
  template <typename Derived>
  Matrix residual(const Eigen::MatrixBase<Derived>& Y) const {
    if (design_.cols() == 0) return Y;
    Matrix coef = gram_.solve(design_.transpose() * Y);
    return Y - design_ * coef;
  }

  template <typename Derived>
  Vector coefficients(const Eigen::MatrixBase<Derived>& y) const {
    if (design_.cols() == 0) return Vector();
    return gram_.solve(design_.transpose() * y);
  }

  Eigen::Index rows() const { return design_.rows(); }
  Eigen::Index cols() const { return design_.cols(); }

 private:
  Matrix design_;
  Eigen::LLT<Matrix> gram_;
};

/// True if X_M^T X_M passes the rank threshold.
bool is_full_rank(const Matrix& XM);

/// Residual sum of squares ||(I - P_X) y||^2.
double rss(const Vector& y, const Matrix& XM, const FeatureSet& label = {});

/// P_perp = I - X (X^T X)^{-1} X^T; identity for an empty design.
Matrix residual_operator(const Matrix& XM, const FeatureSet& label = {});

/// (w, r, o) with (a + b z)^T L (a + b z) = w + r z + o z^2.
struct QuadCoeffs {
  double w = 0.0;
  double r = 0.0;
  double o = 0.0;

  QuadCoeffs operator-(const QuadCoeffs& rhs) const {
    return {w - rhs.w, r - rhs.r, o - rhs.o};
  }
  QuadCoeffs operator*(double s) const { return {w * s, r * s, o * s}; }
  double operator()(double z) const { return w + (r + o * z) * z; }
};

template <typename DA, typename DB, typename DL>
QuadCoeffs quad_form_coeffs(const Eigen::MatrixBase<DA>& a,
                            const Eigen::MatrixBase<DB>& b,
                            const Eigen::MatrixBase<DL>& L) {
  if (a.size() != b.size() || L.rows() != a.size() || L.cols() != a.size())
    throw std::invalid_argument("quad_form_coeffs: dimension mismatch");
  const Vector La = L * a;
  const Vector Lb = L * b;
  return {a.dot(La), a.dot(Lb) + b.dot(La), b.dot(Lb)};
}

/// ||R(u + v z)||^2 written as a quadratic, from the two residual vectors.
template <typename DU, typename DV>
QuadCoeffs squared_norm_coeffs(const Eigen::MatrixBase<DU>& ru,
                               const Eigen::MatrixBase<DV>& rv) {
  return {ru.squaredNorm(), 2.0 * ru.dot(rv), rv.squaredNorm()};
}

enum class Sense { kLessEqualZero, kGreaterEqualZero };

/// w + r z + o z^2 (<= or >=) 0.
struct QuadInequality {
  double w = 0.0;
  double r = 0.0;
  double o = 0.0;
  Sense sense = Sense::kLessEqualZero;

  static QuadInequality less_equal(const QuadCoeffs& c) {
    return {c.w, c.r, c.o, Sense::kLessEqualZero};
  }
  static QuadInequality greater_equal(const QuadCoeffs& c) {
    return {c.w, c.r, c.o, Sense::kGreaterEqualZero};
  }
  double value(double z) const { return w + (r + o * z) * z; }
  bool holds(double z) const {
    const double v = value(z);
    return sense == Sense::kLessEqualZero ? v <= 0.0 : v >= 0.0;
  }
};

/// Solution set of a single inequality.
IntervalSet solve_quad(const QuadInequality& ineq,
                       double tolerance = kCoeffTolerance);

/// Solution set of the conjunction. An empty system is the whole line.
IntervalSet solve_quad_system(std::span<const QuadInequality> system,
                              double tolerance = kCoeffTolerance);

}  // namespace sisda
