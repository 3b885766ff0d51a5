#pragma once

// Exact discrete optimal transport between a source and a target sample with
// uniform marginals, solved by a basis-exposing transportation simplex, plus
// the barycentric source-to-target mapping and the parametric region on which
// an optimal basis stays optimal along a line y(z) = a + b z.

#include <Eigen/Sparse>

#include <optional>
#include <vector>

#include "sisda/numkernel.hpp"

namespace sisda {

/// Features and responses for one domain.
struct DomainData {
  Matrix X;
  Vector y;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Feature part of the transport cost plus the pair-difference operator.
struct TransportCost {
  /// ||X_i^s - X_j^t||^2 at flat index i * n_t + j.
  Vector c_prime;
  /// (Theta y)_{i n_t + j} = y_i^s - y_j^t for the stacked y = (y^s; y^t).
  Eigen::SparseMatrix<double, Eigen::RowMajor> theta;
  int n_s = 0;
  int n_t = 0;

  /// c' + (Theta y) o (Theta y).
  Vector total(const Vector& stacked_y) const;
};

TransportCost cost_vector(const Matrix& Xs, const Matrix& Xt);
inline TransportCost cost_vector(const DomainData& source,
                                 const DomainData& target) {
  return cost_vector(source.X, target.X);
}

/// Optimal basic feasible solution of the transportation LP.
struct TransportSolution {
  int n_s = 0;
  int n_t = 0;
  /// n_s x n_t optimal plan with marginals 1/n_s and 1/n_t.
  Matrix plan;
  /// Sorted flat indices (i * n_t + j) of the n_s + n_t - 1 basic cells.
  std::vector<int> basis;
  Vector fixed_cost;
  int pivots = 0;
  /// Absolute tolerance on reduced costs that accepted this basis.
  double optimality_tolerance = 0.0;

  double objective(const Vector& cost) const;
};

/// Solves the LP with cost c' + (Theta y)o(Theta y). A feasible warm basis
/// (any spanning tree of the bipartite graph) may seed the simplex; otherwise
/// the north-west corner rule does.
TransportSolution solve_transport(const TransportCost& cost, const Vector& stacked_y,
                                  const std::vector<int>* warm_basis = nullptr);

/// Same LP for an arbitrary cost vector of length n_s n_t.
TransportSolution solve_transport_cost(const Vector& cost, int n_s, int n_t,
                                       const std::vector<int>* warm_basis = nullptr);

/// X~^s = n_s T X^t and y~^s = n_s T y^t.
DomainData transform_source(const Matrix& plan, const DomainData& target);

/// Omega = [[0, n_s T], [0, I]]. Stored by its nontrivial block.
class OmegaMatrix {
 public:
  explicit OmegaMatrix(const Matrix& plan);

  Eigen::Index n_s() const { return scaled_plan_.rows(); }
  Eigen::Index n_t() const { return scaled_plan_.cols(); }
  Eigen::Index size() const { return n_s() + n_t(); }
  /// n_s T.
  const Matrix& scaled_plan() const { return scaled_plan_; }

  Matrix dense() const;

  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& V) const {
    if (V.rows() != size()) throw std::invalid_argument("OmegaMatrix: row mismatch");
    Matrix out(size(), V.cols());
    const auto target = V.bottomRows(n_t());
    out.topRows(n_s()).noalias() = scaled_plan_ * target;
    out.bottomRows(n_t()) = target;
    return out;
  }
  Vector apply(const Vector& v) const {
    return apply(Eigen::Map<const Matrix>(v.data(), v.size(), 1)).col(0);
  }

 private:
  Matrix scaled_plan_;
};

inline OmegaMatrix omega(const Matrix& plan) { return OmegaMatrix(plan); }

/// Relative (reduced) cost of every nonbasic cell as p + q z + f z^2.
struct ReducedCostPolynomials {
  std::vector<int> nonbasic;
  Vector p, q, f;
};

ReducedCostPolynomials reduced_cost_polynomials(const TransportSolution& solution,
                                                const TransportCost& cost,
                                                const Vector& a, const Vector& b);

/// {z : basis of `solution` stays optimal for y = a + b z}. `slack` loosens
/// every reduced-cost inequality to >= -slack.
IntervalSet region_Zu(const TransportSolution& solution, const TransportCost& cost,
                      const Vector& a, const Vector& b, double slack = 0.0);

/// Thrown when a basis does not form a spanning tree.
class BasisError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sisda
