#include "sisda/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace sisda {

namespace {

// Spanning tree over rows [0, m) and columns [m, m + n) of the bipartite
// transport graph. Edges are basic cells.
class BasisTree {
 public:
  BasisTree(int m, int n, const std::vector<int>& cells) : m_(m), n_(n), adj_(m + n) {
    if (static_cast<int>(cells.size()) != m + n - 1)
      throw BasisError("basis must have n_s + n_t - 1 cells");
    for (int cell : cells) {
      const int i = cell / n, j = cell % n;
      adj_[i].push_back(cell);
      adj_[m + j].push_back(cell);
    }
  }

  int other_end(int node, int cell) const {
    return node < m_ ? m_ + cell % n_ : cell / n_;
  }

  // Potentials with pot[0] = 0 and pot[i] + pot[m + j] = cost[cell] on edges.
  Vector potentials(const Vector& cost) const {
    Vector pot = Vector::Constant(m_ + n_, std::numeric_limits<double>::quiet_NaN());
    std::vector<int> stack{0};
    pot[0] = 0.0;
    int seen = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int cell : adj_[node]) {
        const int nb = other_end(node, cell);
        if (!std::isnan(pot[nb])) continue;
        pot[nb] = cost[cell] - pot[node];
        stack.push_back(nb);
        ++seen;
      }
    }
    if (seen != m_ + n_) throw BasisError("basis cells do not span the transport graph");
    return pot;
  }

  // Cells on the tree path from column node `to` back to row node `from`,
  // ordered starting at `to`.
  std::vector<int> path(int from, int to) const {
    std::vector<int> parent_cell(m_ + n_, -1);
    std::vector<char> seen(m_ + n_, 0);
    std::vector<int> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node == to) break;
      for (int cell : adj_[node]) {
        const int nb = other_end(node, cell);
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent_cell[nb] = cell;
        stack.push_back(nb);
      }
    }
    std::vector<int> cells;
    for (int node = to; node != from;) {
      const int cell = parent_cell[node];
      if (cell < 0) throw BasisError("basis tree is disconnected");
      cells.push_back(cell);
      node = other_end(node, cell);
    }
    return cells;
  }

  // Primal values x = B^{-1} h by leaf elimination; nullopt if some value is
  // negative (basis infeasible).
  std::optional<std::vector<double>> primal(const std::vector<double>& supply) const {
    std::vector<double> remaining(supply);
    std::vector<int> degree(m_ + n_);
    for (int node = 0; node < m_ + n_; ++node)
      degree[node] = static_cast<int>(adj_[node].size());
    std::vector<char> used(static_cast<std::size_t>(m_) * n_, 0);
    std::vector<double> x(static_cast<std::size_t>(m_) * n_, 0.0);
    std::priority_queue<int, std::vector<int>, std::greater<>> leaves;
    for (int node = 0; node < m_ + n_; ++node)
      if (degree[node] == 1) leaves.push(node);
    int assigned = 0;
    while (!leaves.empty()) {
      const int node = leaves.top();
      leaves.pop();
      if (degree[node] != 1) continue;
      int cell = -1;
      for (int c : adj_[node])
        if (!used[c]) cell = c;
      used[cell] = 1;
      ++assigned;
      const int nb = other_end(node, cell);
      x[cell] = remaining[node];
      remaining[nb] -= remaining[node];
      remaining[node] = 0.0;
      degree[node] = 0;
      if (--degree[nb] == 1) leaves.push(nb);
    }
    if (assigned != m_ + n_ - 1) throw BasisError("basis cells do not form a tree");
    for (double v : x)
      if (v < 0.0) return std::nullopt;
    return x;
  }

 private:
  int m_, n_;
  std::vector<std::vector<int>> adj_;
};

// Integer-scaled marginals: each row ships n, each column receives m. All
// basic solutions are then integral, so degenerate ratio ties are exact.
std::vector<double> scaled_supply(int m, int n) {
  std::vector<double> s(m + n);
  for (int i = 0; i < m; ++i) s[i] = n;
  for (int j = 0; j < n; ++j) s[m + j] = m;
  return s;
}

std::vector<int> north_west_corner(int m, int n, std::vector<double>& x) {
  std::vector<double> s(m, n), d(n, m);
  std::vector<int> basis;
  x.assign(static_cast<std::size_t>(m) * n, 0.0);
  int i = 0, j = 0;
  while (true) {
    const double v = std::min(s[i], d[j]);
    const int cell = i * n + j;
    basis.push_back(cell);
    x[cell] = v;
    s[i] -= v;
    d[j] -= v;
    if (i == m - 1 && j == n - 1) break;
    if (s[i] == 0.0 && i < m - 1) {
      ++i;
    } else {
      ++j;
    }
  }
  return basis;
}

double reduced_cost_tolerance(const Vector& cost, int m, int n) {
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  return 1e-13 * (m + n) * scale;
}

}  // namespace

Vector TransportCost::total(const Vector& stacked_y) const {
  if (stacked_y.size() != n_s + n_t)
    throw std::invalid_argument("TransportCost: stacked response has wrong length");
  const Vector d = theta * stacked_y;
  return c_prime + d.cwiseProduct(d);
}

TransportCost cost_vector(const Matrix& Xs, const Matrix& Xt) {
  if (Xs.cols() != Xt.cols())
    throw std::invalid_argument("cost_vector: source and target feature counts differ");
  if (Xs.rows() < 1 || Xt.rows() < 1)
    throw std::invalid_argument("cost_vector: empty domain");
  TransportCost out;
  out.n_s = static_cast<int>(Xs.rows());
  out.n_t = static_cast<int>(Xt.rows());
  const int m = out.n_s, n = out.n_t;
  out.c_prime.resize(static_cast<Eigen::Index>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.c_prime[i * n + j] = (Xs.row(i) - Xt.row(j)).squaredNorm();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      trip.emplace_back(i * n + j, i, 1.0);
      trip.emplace_back(i * n + j, m + j, -1.0);
    }
  out.theta.resize(static_cast<Eigen::Index>(m) * n, m + n);
  out.theta.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double TransportSolution::objective(const Vector& cost) const {
  double total = 0.0;
  for (int i = 0; i < n_s; ++i)
    for (int j = 0; j < n_t; ++j) total += plan(i, j) * cost[i * n_t + j];
  return total;
}

TransportSolution solve_transport_cost(const Vector& cost, int m, int n,
                                       const std::vector<int>* warm_basis) {
  if (m < 1 || n < 1) throw std::invalid_argument("solve_transport: empty marginals");
  if (cost.size() != static_cast<Eigen::Index>(m) * n)
    throw std::invalid_argument("solve_transport: cost length must be n_s * n_t");

  std::vector<int> basis;
  std::vector<double> x;
  if (warm_basis) {
    basis = *warm_basis;
    auto primal = BasisTree(m, n, basis).primal(scaled_supply(m, n));
    if (primal) {
      x = std::move(*primal);
    } else {
      basis.clear();
    }
  }
  if (basis.empty()) basis = north_west_corner(m, n, x);

  const double tol = reduced_cost_tolerance(cost, m, n);
  std::vector<char> is_basic(static_cast<std::size_t>(m) * n, 0);
  for (int cell : basis) is_basic[cell] = 1;

  int pivots = 0;
  while (true) {
    const BasisTree tree(m, n, basis);
    const Vector pot = tree.potentials(cost);

    // Bland: lowest-index improving cell enters.
    int entering = -1;
    for (int i = 0; i < m && entering < 0; ++i) {
      for (int j = 0; j < n; ++j) {
        const int cell = i * n + j;
        if (is_basic[cell]) continue;
        if (cost[cell] - pot[i] - pot[m + j] < -tol) {
          entering = cell;
          break;
        }
      }
    }
    if (entering < 0) break;

    const int ei = entering / n, ej = entering % n;
    const std::vector<int> cycle = tree.path(ei, m + ej);
    // Cells at even positions (0, 2, ...) lose flow.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cycle.size(); k += 2) theta = std::min(theta, x[cycle[k]]);
    int leaving = -1;
    for (std::size_t k = 0; k < cycle.size(); k += 2)
      if (x[cycle[k]] == theta && (leaving < 0 || cycle[k] < leaving)) leaving = cycle[k];

    for (std::size_t k = 0; k < cycle.size(); ++k) x[cycle[k]] += (k % 2 == 0) ? -theta : theta;
    x[entering] = theta;
    x[leaving] = 0.0;
    is_basic[leaving] = 0;
    is_basic[entering] = 1;
    *std::find(basis.begin(), basis.end(), leaving) = entering;
    ++pivots;
  }

  TransportSolution sol;
  sol.n_s = m;
  sol.n_t = n;
  sol.pivots = pivots;
  sol.optimality_tolerance = tol;
  std::sort(basis.begin(), basis.end());
  sol.basis = std::move(basis);
  sol.plan.resize(m, n);
  const double scale = 1.0 / (static_cast<double>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) sol.plan(i, j) = x[i * n + j] * scale;
  return sol;
}

TransportSolution solve_transport(const TransportCost& cost, const Vector& stacked_y,
                                  const std::vector<int>* warm_basis) {
  TransportSolution sol =
      solve_transport_cost(cost.total(stacked_y), cost.n_s, cost.n_t, warm_basis);
  sol.fixed_cost = cost.c_prime;
  return sol;
}

DomainData transform_source(const Matrix& plan, const DomainData& target) {
  if (plan.cols() != target.X.rows() || target.y.size() != target.X.rows())
    throw std::invalid_argument("transform_source: plan and target sizes disagree");
  const double ns = static_cast<double>(plan.rows());
  return DomainData{ns * plan * target.X, ns * plan * target.y};
}

OmegaMatrix::OmegaMatrix(const Matrix& plan)
    : scaled_plan_(static_cast<double>(plan.rows()) * plan) {}

Matrix OmegaMatrix::dense() const {
  Matrix out = Matrix::Zero(size(), size());
  out.topRightCorner(n_s(), n_t()) = scaled_plan_;
  out.bottomRightCorner(n_t(), n_t()).setIdentity();
  return out;
}

ReducedCostPolynomials reduced_cost_polynomials(const TransportSolution& solution,
                                                const TransportCost& cost,
                                                const Vector& a, const Vector& b) {
  const int m = solution.n_s, n = solution.n_t;
  if (cost.n_s != m || cost.n_t != n)
    throw std::invalid_argument("reduced_cost_polynomials: size mismatch");
  const Vector ta = cost.theta * a;
  const Vector tb = cost.theta * b;
  const Vector p_tilde = cost.c_prime + ta.cwiseProduct(ta);
  const Vector q_tilde = 2.0 * ta.cwiseProduct(tb);
  const Vector f_tilde = tb.cwiseProduct(tb);

  const BasisTree tree(m, n, solution.basis);
  const Vector pp = tree.potentials(p_tilde);
  const Vector pq = tree.potentials(q_tilde);
  const Vector pf = tree.potentials(f_tilde);

  std::vector<char> is_basic(static_cast<std::size_t>(m) * n, 0);
  for (int cell : solution.basis) is_basic[cell] = 1;

  ReducedCostPolynomials out;
  const Eigen::Index count = static_cast<Eigen::Index>(m) * n - (m + n - 1);
  out.nonbasic.reserve(count);
  out.p.resize(count);
  out.q.resize(count);
  out.f.resize(count);
  Eigen::Index k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const int cell = i * n + j;
      if (is_basic[cell]) continue;
      out.nonbasic.push_back(cell);
      out.p[k] = p_tilde[cell] - pp[i] - pp[m + j];
      out.q[k] = q_tilde[cell] - pq[i] - pq[m + j];
      out.f[k] = f_tilde[cell] - pf[i] - pf[m + j];
      ++k;
    }
  return out;
}

IntervalSet region_Zu(const TransportSolution& solution, const TransportCost& cost,
                      const Vector& a, const Vector& b, double slack) {
  const ReducedCostPolynomials rc = reduced_cost_polynomials(solution, cost, a, b);
  IntervalSet acc = IntervalSet::whole();
  for (Eigen::Index k = 0; k < rc.p.size(); ++k) {
    acc = acc.intersect(solve_quad(QuadInequality::greater_equal(
        {rc.p[k] + slack, rc.q[k], rc.f[k]})));
    if (acc.is_empty()) break;
  }
  return acc;
}

}  // namespace sisda
