#pragma once

// Forward/backward sequential feature selection, model-size criteria, and the
// quadratic systems describing where a selection path stays fixed along
// y(z) = a + b z after a fixed transport.

#include <string_view>
#include <vector>

#include "sisda/numkernel.hpp"
#include "sisda/ot.hpp"

namespace sisda {

enum class Direction { kForward, kBackward };
enum class CriterionKind { kFixed, kAic, kBic, kAdjR2 };

std::string_view to_string(Direction d);
std::string_view to_string(CriterionKind c);
Direction parse_direction(std::string_view s);
CriterionKind parse_criterion(std::string_view s);

/// Noise covariance of the stacked response. Identity and scalar forms avoid
/// dense solves.
class Covariance {
 public:
  static Covariance identity(Eigen::Index n) { return scalar(n, 1.0); }
  static Covariance scalar(Eigen::Index n, double variance);
  static Covariance dense(const Matrix& sigma);
  static Covariance block_diagonal(const Matrix& sigma_s, const Matrix& sigma_t);

  Eigen::Index size() const { return n_; }
  bool is_scalar() const { return scalar_; }
  double scalar_variance() const { return variance_; }

  Vector apply(const Vector& v) const;
  /// x^T Sigma^{-1} y.
  double inv_inner(const Vector& x, const Vector& y) const;
  Matrix to_dense() const;
  /// The covariance scaled by s.
  Covariance scaled(double s) const;

 private:
  Eigen::Index n_ = 0;
  bool scalar_ = true;
  double variance_ = 1.0;
  Matrix sigma_;
  Eigen::LLT<Matrix> llt_;
};

/// The path of models visited by a selection run.
struct SelectionTrace {
  Direction direction = Direction::kForward;
  CriterionKind criterion = CriterionKind::kFixed;
  /// Forward: M_1, ..., M_K. Backward: M_p, ..., M_K. Criterion runs keep
  /// the whole path down to size 1 (backward) or up to size p (forward).
  std::vector<FeatureSet> steps;
  /// Feature added (forward) or removed (backward) at each transition.
  std::vector<int> picks;
  /// Selected model (sorted).
  FeatureSet final;

  int k_hat() const { return static_cast<int>(final.size()); }
  bool operator==(const SelectionTrace&) const = default;
};

/// Greedy forward selection of K columns; ties go to the smaller index and
/// candidates that make the design singular are skipped.
SelectionTrace forward_select(const Matrix& X, const Vector& y, int K);

/// Greedy backward elimination from the full model down to K columns.
SelectionTrace backward_select(const Matrix& X, const Vector& y, int K);

/// AIC, BIC, or the adjusted-R^2 surrogate RSS / (n - |M| - 1); lower is
/// better for all three. `n_total` is the stacked sample size.
double criterion_score(CriterionKind kind, const FeatureSet& model, const Matrix& X,
                       const Vector& y, const Covariance& sigma, Eigen::Index n_total);

struct CriterionSelection {
  SelectionTrace trace;
  int k_hat = 0;
  std::vector<double> scores;  // indexed by model size - 1
};

CriterionSelection select_with_criterion(CriterionKind kind, const Matrix& X,
                                         const Vector& y, const Covariance& sigma,
                                         Direction direction);

struct SelectionSpec {
  Direction direction = Direction::kForward;
  CriterionKind criterion = CriterionKind::kFixed;
  int k = 0;  // used only with kFixed
};

/// Dispatches to the fixed-K or criterion selector.
SelectionTrace run_selection(const SelectionSpec& spec, const Matrix& X,
                             const Vector& y, const Covariance& sigma);

/// Transformed responses along the line: y~(z) = u + v z with u = Omega a,
/// v = Omega b; `design` is Omega X.
struct TransformedLine {
  Matrix design;
  Vector u;
  Vector v;

  static TransformedLine make(const OmegaMatrix& omega, const Matrix& X,
                              const Vector& a, const Vector& b);
};

/// Inequalities for a forward/backward path, in (step, competitor) order.
std::vector<QuadInequality> path_inequalities(const SelectionTrace& trace,
                                              const TransformedLine& line);

/// Inequalities keeping the chosen model size optimal among the path models.
std::vector<QuadInequality> criterion_inequalities(CriterionKind kind,
                                                   const SelectionTrace& trace,
                                                   const TransformedLine& line,
                                                   const Covariance& sigma);

IntervalSet region_Zv_forward(const SelectionTrace& trace, const OmegaMatrix& omega,
                              const Matrix& X, const Vector& a, const Vector& b);
IntervalSet region_Zv_backward(const SelectionTrace& trace, const OmegaMatrix& omega,
                               const Matrix& X, const Vector& a, const Vector& b);
IntervalSet region_Z_criterion(CriterionKind kind, const SelectionTrace& trace,
                               const OmegaMatrix& omega, const Matrix& X,
                               const Vector& a, const Vector& b,
                               const Covariance& sigma);

/// Path plus criterion region; `slack` loosens every inequality to <= slack.
IntervalSet selection_region(const SelectionTrace& trace, const TransformedLine& line,
                             const Covariance& sigma, double slack = 0.0);

}  // namespace sisda
