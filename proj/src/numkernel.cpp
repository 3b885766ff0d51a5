#include "sisda/numkernel.hpp"

#include <cmath>
#include <sstream>

namespace sisda {

namespace {

std::string rank_message(const FeatureSet& columns) {
  return "rank-deficient design for column set " + format_feature_set(columns);
}

// LLT plus a reciprocal-condition gate on the Gram matrix.
bool factor_gram(const Matrix& XM, Eigen::LLT<Matrix>& llt) {
  if (XM.cols() == 0) return true;
  if (XM.rows() < XM.cols()) return false;
  llt.compute(XM.transpose() * XM);
  if (llt.info() != Eigen::Success) return false;
  const double rc = llt.rcond();
  return std::isfinite(rc) && rc >= kRankThreshold;
}

}  // namespace

RankDeficiencyError::RankDeficiencyError(FeatureSet columns)
    : std::runtime_error(rank_message(columns)), columns_(std::move(columns)) {}

std::string format_feature_set(const FeatureSet& set) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < set.size(); ++k) os << (k ? "," : "") << set[k];
  os << '}';
  return os.str();
}

Matrix select_columns(const Matrix& X, const FeatureSet& cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= X.cols())
      throw std::out_of_range("select_columns: column index out of range");
    out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
  }
  return out;
}

LeastSquares::LeastSquares(const Matrix& XM, FeatureSet columns) : design_(XM) {
  if (!factor_gram(design_, gram_)) throw RankDeficiencyError(std::move(columns));
}

bool is_full_rank(const Matrix& XM) {
  Eigen::LLT<Matrix> llt;
  return factor_gram(XM, llt);
}

double rss(const Vector& y, const Matrix& XM, const FeatureSet& label) {
  if (y.size() != XM.rows())
    throw std::invalid_argument("rss: row count mismatch");
  return LeastSquares(XM, label).residual(y).squaredNorm();
}

Matrix residual_operator(const Matrix& XM, const FeatureSet& label) {
  const Eigen::Index n = XM.rows();
  return LeastSquares(XM, label).residual(Matrix::Identity(n, n));
}

IntervalSet solve_quad(const QuadInequality& ineq, double tolerance) {
  // Normalise to w + r z + o z^2 <= 0.
  double w = ineq.w, r = ineq.r, o = ineq.o;
  if (ineq.sense == Sense::kGreaterEqualZero) {
    w = -w;
    r = -r;
    o = -o;
  }
  if (std::abs(o) < tolerance) o = 0.0;
  if (std::abs(r) < tolerance) r = 0.0;

  if (o == 0.0 && r == 0.0) {
    return w <= tolerance ? IntervalSet::whole() : IntervalSet::empty();
  }
  if (o == 0.0) {
    const double root = -w / r;
    return r > 0.0 ? IntervalSet::single(-kInf, root)
                   : IntervalSet::single(root, kInf);
  }

  const double disc = r * r - 4.0 * o * w;
  // Snap tiny negative discriminants (relative to the terms) to a double root.
  const double disc_tol = tolerance * std::max({1.0, r * r, std::abs(4.0 * o * w)});
  if (disc < -disc_tol) {
    return o > 0.0 ? IntervalSet::empty() : IntervalSet::whole();
  }
  if (disc <= 0.0) {
    if (o < 0.0) return IntervalSet::whole();
    const double z0 = -r / (2.0 * o);
    return IntervalSet::single(z0, z0);
  }
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (r + std::copysign(sq, r));
  double z1 = q / o;
  double z2 = q != 0.0 ? w / q : z1;
  if (z1 > z2) std::swap(z1, z2);
  if (o > 0.0) return IntervalSet::single(z1, z2);
  return IntervalSet({Interval{-kInf, z1}, Interval{z2, kInf}});
}

IntervalSet solve_quad_system(std::span<const QuadInequality> system,
                              double tolerance) {
  IntervalSet acc = IntervalSet::whole();
  for (const auto& ineq : system) {
    acc = acc.intersect(solve_quad(ineq, tolerance));
    if (acc.is_empty()) break;
  }
  return acc;
}

}  // namespace sisda
