#include "sisda/seqfs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace sisda {

namespace {

FeatureSet with(const FeatureSet& base, int j) {
  FeatureSet out(base);
  out.insert(std::upper_bound(out.begin(), out.end(), j), j);
  return out;
}

FeatureSet without(const FeatureSet& base, int j) {
  FeatureSet out(base);
  out.erase(std::remove(out.begin(), out.end(), j), out.end());
  return out;
}

bool contains(const FeatureSet& set, int j) {
  return std::binary_search(set.begin(), set.end(), j);
}

// RSS of y on X_model, or nullopt if that design is singular.
std::optional<double> model_rss(const Matrix& X, const Vector& y, const FeatureSet& model) {
  const Matrix XM = select_columns(X, model);
  if (!is_full_rank(XM)) return std::nullopt;
  return LeastSquares(XM, model).residual(y).squaredNorm();
}

// Forward path of at most `max_steps` additions.
SelectionTrace forward_path(const Matrix& X, const Vector& y, int max_steps) {
  SelectionTrace trace;
  trace.direction = Direction::kForward;
  FeatureSet current;
  const int p = static_cast<int>(X.cols());
  for (int step = 0; step < max_steps; ++step) {
    int best = -1;
    double best_rss = 0.0;
    for (int j = 0; j < p; ++j) {
      if (contains(current, j)) continue;
      const auto value = model_rss(X, y, with(current, j));
      if (!value) continue;
      if (best < 0 || *value < best_rss) {
        best = j;
        best_rss = *value;
      }
    }
    if (best < 0) break;
    current = with(current, best);
    trace.picks.push_back(best);
    trace.steps.push_back(current);
  }
  if (!trace.steps.empty()) trace.final = trace.steps.back();
  return trace;
}

// Backward path from the full model down to `min_size` columns.
SelectionTrace backward_path(const Matrix& X, const Vector& y, int min_size) {
  const int p = static_cast<int>(X.cols());
  SelectionTrace trace;
  trace.direction = Direction::kBackward;
  FeatureSet current(p);
  for (int j = 0; j < p; ++j) current[j] = j;
  if (!is_full_rank(X)) throw RankDeficiencyError(current);
  trace.steps.push_back(current);
  while (static_cast<int>(current.size()) > min_size) {
    int best = -1;
    double best_rss = 0.0;
    for (int j : current) {
      const auto value = model_rss(X, y, without(current, j));
      if (!value) continue;
      if (best < 0 || *value < best_rss) {
        best = j;
        best_rss = *value;
      }
    }
    current = without(current, best);
    trace.picks.push_back(best);
    trace.steps.push_back(current);
  }
  trace.final = trace.steps.back();
  return trace;
}

void check_rows(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("selection: row count mismatch");
}

// Quadratic coefficients of ||P_perp(u + v z)||^2 and its Sigma^{-1} variant,
// cached per model.
class ModelQuadCache {
 public:
  ModelQuadCache(const TransformedLine& line, const Covariance* sigma)
      : line_(line), sigma_(sigma) {
    uv_.resize(line.u.size(), 2);
    uv_.col(0) = line.u;
    uv_.col(1) = line.v;
  }

  std::optional<QuadCoeffs> rss(const FeatureSet& model) { return get(model).first; }
  std::optional<QuadCoeffs> weighted(const FeatureSet& model) { return get(model).second; }

 private:
  using Entry = std::pair<std::optional<QuadCoeffs>, std::optional<QuadCoeffs>>;

  const Entry& get(const FeatureSet& model) {
    auto it = cache_.find(model);
    if (it != cache_.end()) return it->second;
    Entry e;
    const Matrix XM = select_columns(line_.design, model);
    if (is_full_rank(XM)) {
      const Matrix R = LeastSquares(XM, model).residual(uv_);
      e.first = squared_norm_coeffs(R.col(0), R.col(1));
      if (sigma_) {
        const Vector ru = R.col(0), rv = R.col(1);
        e.second = QuadCoeffs{sigma_->inv_inner(ru, ru), 2.0 * sigma_->inv_inner(ru, rv),
                              sigma_->inv_inner(rv, rv)};
      }
    }
    return cache_.emplace(model, std::move(e)).first->second;
  }

  const TransformedLine& line_;
  const Covariance* sigma_;
  Matrix uv_;
  std::map<FeatureSet, Entry> cache_;
};

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kForward ? "forward" : "backward";
}

std::string_view to_string(CriterionKind c) {
  switch (c) {
    case CriterionKind::kFixed: return "fixed";
    case CriterionKind::kAic: return "aic";
    case CriterionKind::kBic: return "bic";
    case CriterionKind::kAdjR2: return "adjr2";
  }
  return "?";
}

Direction parse_direction(std::string_view s) {
  if (s == "forward") return Direction::kForward;
  if (s == "backward") return Direction::kBackward;
  throw std::invalid_argument("unknown direction '" + std::string(s) + "'");
}

CriterionKind parse_criterion(std::string_view s) {
  if (s == "fixed") return CriterionKind::kFixed;
  if (s == "aic") return CriterionKind::kAic;
  if (s == "bic") return CriterionKind::kBic;
  if (s == "adjr2") return CriterionKind::kAdjR2;
  throw std::invalid_argument("unknown criterion '" + std::string(s) + "'");
}

Covariance Covariance::scalar(Eigen::Index n, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("Covariance: variance must be positive");
  Covariance c;
  c.n_ = n;
  c.scalar_ = true;
  c.variance_ = variance;
  return c;
}

Covariance Covariance::dense(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("Covariance: not square");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw std::invalid_argument("Covariance: not symmetric");
  Covariance c;
  c.n_ = sigma.rows();
  c.scalar_ = false;
  c.sigma_ = sigma;
  c.llt_.compute(sigma);
  if (c.llt_.info() != Eigen::Success)
    throw std::invalid_argument("Covariance: not positive definite");
  return c;
}

Covariance Covariance::block_diagonal(const Matrix& sigma_s, const Matrix& sigma_t) {
  const Eigen::Index ns = sigma_s.rows(), nt = sigma_t.rows();
  Matrix full = Matrix::Zero(ns + nt, ns + nt);
  full.topLeftCorner(ns, ns) = sigma_s;
  full.bottomRightCorner(nt, nt) = sigma_t;
  return dense(full);
}

Vector Covariance::apply(const Vector& v) const {
  if (scalar_) return variance_ * v;
  return sigma_ * v;
}

double Covariance::inv_inner(const Vector& x, const Vector& y) const {
  if (scalar_) return x.dot(y) / variance_;
  return x.dot(llt_.solve(y));
}

Matrix Covariance::to_dense() const {
  if (scalar_) return variance_ * Matrix::Identity(n_, n_);
  return sigma_;
}

Covariance Covariance::scaled(double s) const {
  if (scalar_) return scalar(n_, variance_ * s);
  return dense(sigma_ * s);
}

SelectionTrace forward_select(const Matrix& X, const Vector& y, int K) {
  check_rows(X, y);
  if (K < 1 || K > X.cols())
    throw std::invalid_argument("forward_select: K must be in [1, p]");
  SelectionTrace trace = forward_path(X, y, K);
  if (static_cast<int>(trace.steps.size()) < K)
    throw std::invalid_argument("forward_select: K = " + std::to_string(K) +
                                " exceeds the number of admissible features (" +
                                std::to_string(trace.steps.size()) + ")");
  return trace;
}

SelectionTrace backward_select(const Matrix& X, const Vector& y, int K) {
  check_rows(X, y);
  if (K < 1 || K > X.cols())
    throw std::invalid_argument("backward_select: K must be in [1, p]");
  return backward_path(X, y, K);
}

double criterion_score(CriterionKind kind, const FeatureSet& model, const Matrix& X,
                       const Vector& y, const Covariance& sigma, Eigen::Index n_total) {
  check_rows(X, y);
  const double size = static_cast<double>(model.size());
  const Matrix XM = select_columns(X, model);
  const Vector r = LeastSquares(XM, model).residual(y);
  switch (kind) {
    case CriterionKind::kAic:
      return sigma.inv_inner(r, r) + 2.0 * size;
    case CriterionKind::kBic:
      return sigma.inv_inner(r, r) + std::log(static_cast<double>(n_total)) * size;
    case CriterionKind::kAdjR2: {
      const double dof = static_cast<double>(n_total) - size - 1.0;
      if (dof <= 0.0)
        throw std::invalid_argument("adjusted R^2 needs |M| < n - 1");
      return r.squaredNorm() / dof;
    }
    case CriterionKind::kFixed:
      break;
  }
  throw std::invalid_argument("criterion_score: fixed-K has no score");
}

CriterionSelection select_with_criterion(CriterionKind kind, const Matrix& X,
                                         const Vector& y, const Covariance& sigma,
                                         Direction direction) {
  check_rows(X, y);
  if (kind == CriterionKind::kFixed)
    throw std::invalid_argument("select_with_criterion: criterion required");
  CriterionSelection out;
  out.trace = direction == Direction::kForward
                  ? forward_path(X, y, static_cast<int>(X.cols()))
                  : backward_path(X, y, 1);
  if (out.trace.steps.empty())
    throw std::invalid_argument("select_with_criterion: no admissible feature");
  out.trace.criterion = kind;
  int max_size = 0;
  for (const auto& model : out.trace.steps)
    max_size = std::max(max_size, static_cast<int>(model.size()));
  out.scores.assign(max_size, kInf);
  for (const auto& model : out.trace.steps)
    out.scores[model.size() - 1] = criterion_score(kind, model, X, y, sigma, X.rows());
  out.k_hat = 1;
  for (int k = 2; k <= max_size; ++k)
    if (out.scores[k - 1] < out.scores[out.k_hat - 1]) out.k_hat = k;
  for (const auto& model : out.trace.steps)
    if (static_cast<int>(model.size()) == out.k_hat) out.trace.final = model;
  return out;
}

SelectionTrace run_selection(const SelectionSpec& spec, const Matrix& X, const Vector& y,
                             const Covariance& sigma) {
  if (spec.criterion == CriterionKind::kFixed) {
    return spec.direction == Direction::kForward ? forward_select(X, y, spec.k)
                                                 : backward_select(X, y, spec.k);
  }
  return select_with_criterion(spec.criterion, X, y, sigma, spec.direction).trace;
}

TransformedLine TransformedLine::make(const OmegaMatrix& omega, const Matrix& X,
                                      const Vector& a, const Vector& b) {
  return {omega.apply(X), omega.apply(a), omega.apply(b)};
}

std::vector<QuadInequality> path_inequalities(const SelectionTrace& trace,
                                              const TransformedLine& line) {
  ModelQuadCache cache(line, nullptr);
  const int p = static_cast<int>(line.design.cols());
  std::vector<QuadInequality> out;
  auto add = [&](const FeatureSet& winner, const FeatureSet& rival) {
    const auto rival_q = cache.rss(rival);
    if (!rival_q) return;  // singular rivals are never eligible
    const auto winner_q = cache.rss(winner);
    if (!winner_q) throw RankDeficiencyError(winner);
    out.push_back(QuadInequality::less_equal(*winner_q - *rival_q));
  };

  if (trace.direction == Direction::kForward) {
    FeatureSet base;
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
      for (int j = 0; j < p; ++j) {
        if (contains(base, j) || j == trace.picks[s]) continue;
        add(trace.steps[s], with(base, j));
      }
      base = trace.steps[s];
    }
  } else {
    for (std::size_t s = 0; s < trace.picks.size(); ++s) {
      const FeatureSet& current = trace.steps[s];
      for (int j : current) {
        if (j == trace.picks[s]) continue;
        add(trace.steps[s + 1], without(current, j));
      }
    }
  }
  return out;
}

std::vector<QuadInequality> criterion_inequalities(CriterionKind kind,
                                                   const SelectionTrace& trace,
                                                   const TransformedLine& line,
                                                   const Covariance& sigma) {
  if (kind == CriterionKind::kFixed) return {};
  ModelQuadCache cache(line, &sigma);
  const double n = static_cast<double>(line.design.rows());
  auto score = [&](const FeatureSet& model) -> QuadCoeffs {
    const double size = static_cast<double>(model.size());
    switch (kind) {
      case CriterionKind::kAic: {
        QuadCoeffs q = *cache.weighted(model);
        q.w += 2.0 * size;
        return q;
      }
      case CriterionKind::kBic: {
        QuadCoeffs q = *cache.weighted(model);
        q.w += std::log(n) * size;
        return q;
      }
      case CriterionKind::kAdjR2:
        return *cache.rss(model) * (1.0 / (n - size - 1.0));
      case CriterionKind::kFixed:
        break;
    }
    return {};
  };
  const FeatureSet* chosen = nullptr;
  for (const auto& model : trace.steps)
    if (model == trace.final) chosen = &model;
  if (!chosen) throw std::logic_error("criterion_inequalities: final model not on path");
  const QuadCoeffs best = score(*chosen);
  std::vector<QuadInequality> out;
  for (const auto& model : trace.steps) {
    if (&model == chosen) continue;
    out.push_back(QuadInequality::less_equal(best - score(model)));
  }
  return out;
}

IntervalSet selection_region(const SelectionTrace& trace, const TransformedLine& line,
                             const Covariance& sigma, double slack) {
  std::vector<QuadInequality> system = path_inequalities(trace, line);
  const auto extra = criterion_inequalities(trace.criterion, trace, line, sigma);
  system.insert(system.end(), extra.begin(), extra.end());
  for (auto& ineq : system) ineq.w -= slack;
  return solve_quad_system(system);
}

IntervalSet region_Zv_forward(const SelectionTrace& trace, const OmegaMatrix& omega,
                              const Matrix& X, const Vector& a, const Vector& b) {
  if (trace.direction != Direction::kForward)
    throw std::invalid_argument("region_Zv_forward: backward trace");
  return solve_quad_system(path_inequalities(trace, TransformedLine::make(omega, X, a, b)));
}

IntervalSet region_Zv_backward(const SelectionTrace& trace, const OmegaMatrix& omega,
                               const Matrix& X, const Vector& a, const Vector& b) {
  if (trace.direction != Direction::kBackward)
    throw std::invalid_argument("region_Zv_backward: forward trace");
  return solve_quad_system(path_inequalities(trace, TransformedLine::make(omega, X, a, b)));
}

IntervalSet region_Z_criterion(CriterionKind kind, const SelectionTrace& trace,
                               const OmegaMatrix& omega, const Matrix& X,
                               const Vector& a, const Vector& b,
                               const Covariance& sigma) {
  return solve_quad_system(
      criterion_inequalities(kind, trace, TransformedLine::make(omega, X, a, b), sigma));
}

}  // namespace sisda
