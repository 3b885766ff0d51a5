#include "sisda/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "sisda/truncated_normal.hpp"

namespace sisda {

namespace {

double probe_step(double z, double floor) {
  return std::max(floor, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(z));
}

// Slack on the selection inequalities: a few ulps of the largest score.
double selection_slack(const Vector& ytilde, const Covariance& sigma) {
  double scale = ytilde.squaredNorm();
  if (sigma.is_scalar()) scale = std::max(scale, scale / sigma.scalar_variance());
  return 1e-11 * (1.0 + scale);
}

}  // namespace

StackedResponse StackedResponse::make(const DomainData& source, const DomainData& target,
                                      Covariance sigma) {
  StackedResponse out;
  out.n_s = static_cast<int>(source.y.size());
  out.n_t = static_cast<int>(target.y.size());
  out.y.resize(out.n_s + out.n_t);
  out.y << source.y, target.y;
  if (sigma.size() != out.y.size())
    throw std::invalid_argument("StackedResponse: covariance size mismatch");
  out.sigma = std::move(sigma);
  return out;
}

TestDirection build_direction(int j, const FeatureSet& M, const Matrix& Xt_target,
                              const StackedResponse& stacked) {
  const auto pos = std::find(M.begin(), M.end(), j);
  if (pos == M.end()) throw std::invalid_argument("build_direction: feature not in model");
  if (Xt_target.rows() != stacked.n_t)
    throw std::invalid_argument("build_direction: target size mismatch");
  const Matrix XM = select_columns(Xt_target, M);
  if (!is_full_rank(XM)) throw RankDeficiencyError(M);
  Vector e = Vector::Zero(static_cast<Eigen::Index>(M.size()));
  e[pos - M.begin()] = 1.0;
  const Matrix gram = XM.transpose() * XM;
  const Vector eta_t = XM * gram.llt().solve(e);

  TestDirection d;
  d.feature = j;
  d.eta = Vector::Zero(stacked.n_s + stacked.n_t);
  d.eta.tail(stacked.n_t) = eta_t;
  d.z_obs = d.eta.dot(stacked.y);
  const Vector sigma_eta = stacked.sigma.apply(d.eta);
  d.variance = d.eta.dot(sigma_eta);
  if (!(d.variance > 0.0)) throw std::runtime_error("build_direction: zero test variance");
  d.b = sigma_eta / d.variance;
  d.a = stacked.y - d.b * d.z_obs;
  return d;
}

SeqfsDaProblem SeqfsDaProblem::make(const Matrix& Xs, const Matrix& Xt, Covariance sigma,
                                    SelectionSpec selection) {
  SeqfsDaProblem p;
  p.Xs = Xs;
  p.Xt = Xt;
  p.X.resize(Xs.rows() + Xt.rows(), Xs.cols());
  p.X << Xs, Xt;
  p.cost = cost_vector(Xs, Xt);
  if (sigma.size() != p.X.rows())
    throw std::invalid_argument("SeqfsDaProblem: covariance size mismatch");
  p.sigma = std::move(sigma);
  p.selection = selection;
  return p;
}

PipelineOutcome run_pipeline(const SeqfsDaProblem& problem, const Vector& stacked_y,
                             const std::vector<int>* warm_basis) {
  PipelineOutcome out;
  out.transport = solve_transport(problem.cost, stacked_y, warm_basis);
  const OmegaMatrix om(out.transport.plan);
  out.trace = run_selection(problem.selection, om.apply(problem.X), om.apply(stacked_y),
                            problem.sigma);
  return out;
}

ScanResult divide_and_conquer(const SeqfsDaProblem& problem, const Vector& a,
                              const Vector& b, double z_min, double z_max,
                              const ScanConfig& config) {
  if (!(z_min < z_max)) throw std::invalid_argument("divide_and_conquer: empty range");
  ScanResult scan;
  std::vector<int> warm;
  double z = z_min;

  auto record = [&](const std::vector<int>& basis, SelectionTrace trace, double lo,
                    double hi) {
    if (!scan.subproblems.empty()) {
      scan.max_tiling_error = std::max(
          scan.max_tiling_error, std::abs(scan.subproblems.back().interval.hi - lo));
    }
    scan.subproblems.push_back({basis, std::move(trace), Interval{lo, hi}});
    if (scan.subproblems.size() > config.max_subproblems)
      throw std::runtime_error("divide_and_conquer: sub-problem limit exceeded");
  };

  while (z < z_max) {
    const double step = probe_step(z, config.step_floor);
    const double probe = z + step;
    const Vector y = a + b * probe;
    const TransportSolution sol =
        solve_transport(problem.cost, y, warm.empty() ? nullptr : &warm);
    warm = sol.basis;
    ++scan.transport_bases;

    const IntervalSet zu = region_Zu(sol, problem.cost, a, b, sol.optimality_tolerance);
    const auto comp_u = zu.component_containing(probe);
    const OmegaMatrix om(sol.plan);
    const TransformedLine line = TransformedLine::make(om, problem.X, a, b);

    if (!comp_u) {
      const Vector yt = line.u + line.v * probe;
      const double hi = std::min(probe, z_max);
      record(sol.basis, run_selection(problem.selection, line.design, yt, problem.sigma), z,
             hi);
      ++scan.forced_steps;
      z = hi;
      continue;
    }

    const double u_end = std::min(comp_u->hi, z_max);
    while (z < u_end) {
      const double probe_v = z + std::min(probe_step(z, config.step_floor), 0.5 * (u_end - z));
      const Vector yt = line.u + line.v * probe_v;
      SelectionTrace trace = run_selection(problem.selection, line.design, yt, problem.sigma);
      const IntervalSet zv =
          selection_region(trace, line, problem.sigma, selection_slack(yt, problem.sigma));
      const auto comp_v = zv.component_containing(probe_v);
      double end;
      if (comp_v) {
        end = std::min(comp_v->hi, u_end);
      } else {
        end = std::min(z + probe_step(z, config.step_floor), u_end);
        ++scan.forced_steps;
      }
      record(sol.basis, std::move(trace), z, end);
      z = end;
    }
  }
  if (!scan.subproblems.empty()) {
    scan.max_tiling_error = std::max(
        {scan.max_tiling_error, std::abs(scan.subproblems.front().interval.lo - z_min),
         std::max(0.0, z_max - scan.subproblems.back().interval.hi)});
  }
  return scan;
}

IntervalSet assemble_region(std::span<const Subproblem> subproblems,
                            const FeatureSet& observed) {
  FeatureSet target(observed);
  std::sort(target.begin(), target.end());
  std::vector<Interval> parts;
  for (const auto& sp : subproblems) {
    FeatureSet got(sp.trace.final);
    std::sort(got.begin(), got.end());
    if (got == target) parts.push_back(sp.interval);
  }
  return IntervalSet(std::move(parts));
}

double truncated_p(double z_obs, double variance, const IntervalSet& region) {
  if (!(variance > 0.0)) throw std::invalid_argument("truncated_p: variance must be positive");
  const double sigma = std::sqrt(variance);
  const double log_den = log_normal_mass(region, sigma);
  if (log_den == -kInf || std::isnan(log_den))
    throw std::runtime_error(
        "truncation region carries no probability mass; widen the z range");
  const double t = std::abs(z_obs);
  const IntervalSet tails({Interval{-kInf, -t}, Interval{t, kInf}});
  const double log_num = log_normal_mass(region.intersect(tails), sigma);
  if (log_num == -kInf) return 0.0;
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

double p_naive(double z_obs, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("p_naive: variance must be positive");
  const double s = std::abs(z_obs) / std::sqrt(variance);
  return std::min(1.0, 2.0 * std::exp(log_normal_sf(s)));
}

double bonferroni_factor(int p, int K) {
  if (K < 0 || K > p) throw std::invalid_argument("bonferroni_factor: need 0 <= K <= p");
  double c = 1.0;
  for (int k = 0; k < K; ++k) c *= static_cast<double>(p - k);
  return c;
}

double p_bonferroni(double z_obs, double variance, int p, int K) {
  return std::min(1.0, bonferroni_factor(p, K) * p_naive(z_obs, variance));
}

double p_over_conditioning(double z_obs, double variance, const Interval& subproblem) {
  return truncated_p(z_obs, variance, IntervalSet({subproblem}));
}

SelectiveResult infer_feature(const SeqfsDaProblem& problem, const StackedResponse& stacked,
                              const PipelineOutcome& observed, int feature,
                              const InferenceConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  SelectiveResult res;
  res.feature = feature;
  try {
    const FeatureSet& M = observed.trace.final;
    const TestDirection dir = build_direction(feature, M, problem.Xt, stacked);
    res.z_obs = dir.z_obs;
    res.variance = dir.variance;
    const double sigma = std::sqrt(dir.variance);
    const double half = std::max(config.z_mult * sigma, std::abs(dir.z_obs) + sigma);
    res.z_min = -half;
    res.z_max = half;

    const ScanResult scan = divide_and_conquer(problem, dir.a, dir.b, -half, half, config.scan);
    res.subproblem_count = static_cast<int>(scan.subproblems.size());
    res.forced_steps = scan.forced_steps;
    res.max_tiling_error = scan.max_tiling_error;
    res.region = assemble_region(scan.subproblems, M);

    // Over-conditioning: the observed basis and path only.
    const OmegaMatrix om(observed.transport.plan);
    const TransformedLine line = TransformedLine::make(om, problem.X, dir.a, dir.b);
    const Vector yt = line.u + line.v * dir.z_obs;
    IntervalSet zuv =
        region_Zu(observed.transport, problem.cost, dir.a, dir.b,
                  observed.transport.optimality_tolerance)
            .intersect(selection_region(observed.trace, line, problem.sigma,
                                        selection_slack(yt, problem.sigma)))
            .clip(-half, half);
    auto comp = zuv.component_containing(dir.z_obs);
    if (!comp) {
      for (const auto& sp : scan.subproblems)
        if (sp.interval.contains(dir.z_obs)) comp = sp.interval;
    }
    if (!comp) throw std::logic_error("observed statistic not covered by the scan");

    const auto host = res.region.component_containing(dir.z_obs);
    if (!host) {
      // The tile holding z_obs must reproduce the observed model.
      throw std::logic_error("observed statistic lies outside its truncation region");
    }
    // The over-conditioned event is a subset of the selection event; clip
    // away endpoint round-off so that nesting holds exactly.
    res.oc_interval = Interval{std::max(comp->lo, host->lo), std::min(comp->hi, host->hi)};
    res.p_selective = truncated_p(dir.z_obs, dir.variance, res.region);
    res.p_naive = p_naive(dir.z_obs, dir.variance);
    res.p_bonferroni = p_bonferroni(dir.z_obs, dir.variance,
                                    static_cast<int>(problem.X.cols()),
                                    static_cast<int>(M.size()));
    res.p_oc = p_over_conditioning(dir.z_obs, dir.variance, res.oc_interval);
  } catch (const std::exception& e) {
    res.error = e.what();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.p_selective = res.p_naive = res.p_bonferroni = res.p_oc = nan;
  }
  res.wall_time = std::chrono::steady_clock::now() - start;
  return res;
}

AnalysisResult run_si_seqfs_da(const DomainData& source, const DomainData& target,
                               const Covariance& sigma, const InferenceConfig& config) {
  const SeqfsDaProblem problem =
      SeqfsDaProblem::make(source.X, target.X, sigma, config.selection);
  const StackedResponse stacked = StackedResponse::make(source, target, sigma);
  AnalysisResult out;
  out.observed = run_pipeline(problem, stacked.y);
  const FeatureSet& M = out.observed.trace.final;
  out.features.resize(M.size());

  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(M.size())));
  if (threads == 1) {
    for (std::size_t k = 0; k < M.size(); ++k)
      out.features[k] = infer_feature(problem, stacked, out.observed, M[k], config);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < M.size(); k = next++)
        out.features[k] = infer_feature(problem, stacked, out.observed, M[k], config);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

ResolvedSigma resolve_sigma(const SigmaSpec& spec, const DomainData& source,
                            const DomainData& target) {
  const Eigen::Index n = source.n() + target.n();
  switch (spec.kind) {
    case SigmaSpec::Kind::kIdentity:
      return {Covariance::identity(n), false};
    case SigmaSpec::Kind::kScalar:
      return {Covariance::scalar(n, spec.variance), false};
    case SigmaSpec::Kind::kMatrix:
      if (spec.matrix.rows() != n)
        throw std::invalid_argument("covariance matrix must be (n_s + n_t) square");
      return {Covariance::dense(spec.matrix), false};
    case SigmaSpec::Kind::kEstimate: {
      const Eigen::Index dof = target.n() - target.p();
      if (dof <= 0)
        throw std::invalid_argument("cannot estimate sigma: need n_t > p for the full model");
      FeatureSet all(target.p());
      std::iota(all.begin(), all.end(), 0);
      const double s2 = rss(target.y, target.X, all) / static_cast<double>(dof);
      return {Covariance::scalar(n, s2), true};
    }
  }
  throw std::invalid_argument("resolve_sigma: unknown kind");
}

Covariance restrict_covariance(const Covariance& sigma, const std::vector<int>& indices) {
  const auto k = static_cast<Eigen::Index>(indices.size());
  if (sigma.is_scalar()) return Covariance::scalar(k, sigma.scalar_variance());
  const Matrix full = sigma.to_dense();
  Matrix sub(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = full(indices[r], indices[c]);
  return Covariance::dense(sub);
}

DataSplitOutcome p_data_splitting(const DomainData& source, const DomainData& target,
                                  const Covariance& sigma, const SelectionSpec& selection,
                                  std::uint64_t seed) {
  const int ns = static_cast<int>(source.n()), nt = static_cast<int>(target.n());
  std::mt19937_64 rng(seed);
  auto split = [&rng](int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const int half = n / 2;
    std::vector<int> first(idx.begin(), idx.begin() + half);
    std::vector<int> second(idx.begin() + half, idx.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return std::pair{first, second};
  };
  const auto [s_sel, s_inf] = split(ns);
  const auto [t_sel, t_inf] = split(nt);
  if (s_sel.empty() || t_sel.empty() || t_inf.empty())
    throw std::invalid_argument("data splitting: each domain needs at least two instances");

  auto take = [](const DomainData& d, const std::vector<int>& rows) {
    DomainData out{Matrix(rows.size(), d.p()), Vector(rows.size())};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.X.row(r) = d.X.row(rows[r]);
      out.y[r] = d.y[rows[r]];
    }
    return out;
  };
  const DomainData src_a = take(source, s_sel), tgt_a = take(target, t_sel);
  const DomainData tgt_b = take(target, t_inf);

  std::vector<int> stacked_a(s_sel);
  for (int j : t_sel) stacked_a.push_back(ns + j);
  std::vector<int> target_b;
  for (int j : t_inf) target_b.push_back(ns + j);

  const SeqfsDaProblem problem =
      SeqfsDaProblem::make(src_a.X, tgt_a.X, restrict_covariance(sigma, stacked_a), selection);
  Vector y_a(src_a.n() + tgt_a.n());
  y_a << src_a.y, tgt_a.y;
  DataSplitOutcome out;
  out.selected = run_pipeline(problem, y_a).trace.final;

  const Covariance sigma_b = restrict_covariance(sigma, target_b);
  const Matrix XM = select_columns(tgt_b.X, out.selected);
  const bool usable = is_full_rank(XM);
  for (std::size_t k = 0; k < out.selected.size(); ++k) {
    if (!usable) {
      out.p_values.push_back(std::nullopt);
      continue;
    }
    Vector e = Vector::Zero(static_cast<Eigen::Index>(out.selected.size()));
    e[static_cast<Eigen::Index>(k)] = 1.0;
    const Vector eta = XM * (XM.transpose() * XM).llt().solve(e);
    out.p_values.push_back(p_naive(eta.dot(tgt_b.y), eta.dot(sigma_b.apply(eta))));
  }
  return out;
}

}  // namespace sisda
