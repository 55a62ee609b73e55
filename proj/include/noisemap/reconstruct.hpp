#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "noisemap/basis.hpp"
#include "noisemap/error.hpp"
#include "noisemap/grid.hpp"

namespace noisemap {

enum class Method { L1, Linear, NearestNeighbor, GaussianProcess };

inline const char* to_string(Method m)
{
  switch (m) {
    case Method::L1: return "l1";
    case Method::Linear: return "li";
    case Method::NearestNeighbor: return "nni";
    default: return "gpi";
  }
}

inline Method method_from_string(const std::string& s)
{
  if (s == "l1") return Method::L1;
  if (s == "li") return Method::Linear;
  if (s == "nni") return Method::NearestNeighbor;
  if (s == "gpi") return Method::GaussianProcess;
  throw Error("bad_method", "unknown reconstruction method '" + s + "'");
}

inline constexpr std::array<Method, 4> kAllMethods = {Method::L1, Method::Linear,
                                                      Method::NearestNeighbor,
                                                      Method::GaussianProcess};

/// x ~ a g + b t + c over 1-based integer cell coordinates.
struct LinearModel
{
  double a = 0.0, b = 0.0, c = 0.0;
  double residual_rms = 0.0;
  bool uses_g = true, uses_t = true;

  double predict(double g, double t) const { return a * g + b * t + c; }
};

/// dist = sqrt(a dg^2 + b dt^2), normalised to a + b = 1.
struct NniMetric
{
  double a = 0.5, b = 0.5;
  double loo_rms = 0.0;
};

struct GpHyper
{
  double length_g = 1.0;
  double length_t = 1.0;
  double signal_var = 1.0;
  double noise_var = 1e-2;
  double mean = 0.0;
  double log_marginal = 0.0;
};

struct SolverDiagnostics
{
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double constraint_residual = 0.0;
  double epsilon = 0.0;
  bool converged = true;
};

struct ReconResult
{
  NoiseProfile profile;
  Method method = Method::L1;
  std::vector<double> posterior_std; ///< GPI only, per cell
  SolverDiagnostics solver;
  std::optional<LinearModel> linear;
  std::optional<NniMetric> metric;
  std::optional<GpHyper> gp;
  std::vector<std::string> notes;
};

/// Root-mean-square difference over every cell.
inline double rms_error(const NoiseProfile& recon, const NoiseProfile& truth)
{
  if (!recon.lattice.same_shape(truth.lattice))
    throw Error("lattice_mismatch", "profiles are defined on different lattices");
  return rms(recon.values, truth.values);
}

namespace detail {

inline void require_samples(const SampleSet& s, std::size_t n, const char* what)
{
  if (s.size() < n)
    throw Error("too_few_samples", std::string(what) + " needs at least " + std::to_string(n) +
                                     " samples");
}

inline NoiseProfile fill_missing(const SampleSet& s, const std::function<double(std::size_t, std::size_t)>& f)
{
  NoiseProfile p = s.to_profile();
  const auto& l = s.lattice();
  for (std::size_t idx = 0; idx < l.size(); ++idx)
    if (!p.defined(idx)) {
      auto [g, t] = l.cell(idx);
      p.values[idx] = f(g, t);
    }
  return p;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear interpolation

/**
 * Ordinary least squares fit of x = a g + b t + c. When the design is rank
 * deficient the g or t term is dropped (whichever leaves the smaller residual),
 * and with a single distinct cell only the constant remains.
 */
inline LinearModel fit_linear(const SampleSet& s, std::vector<std::string>* notes = nullptr)
{
  detail::require_samples(s, 1, "linear interpolation");
  const auto e = s.entries();
  const auto m = static_cast<Eigen::Index>(e.size());
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i)
    y(i) = e[static_cast<std::size_t>(i)].x;

  struct Candidate { bool g, t; };
  const Candidate candidates[] = {{true, true}, {true, false}, {false, true}, {false, false}};
  std::optional<LinearModel> best;
  for (const auto& cand : candidates) {
    const int cols = 1 + cand.g + cand.t;
    if (m < cols)
      continue;
    Eigen::MatrixXd X(m, cols);
    for (Eigen::Index i = 0; i < m; ++i) {
      int c = 0;
      if (cand.g) X(i, c++) = static_cast<double>(e[static_cast<std::size_t>(i)].g);
      if (cand.t) X(i, c++) = static_cast<double>(e[static_cast<std::size_t>(i)].t);
      X(i, c) = 1.0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < cols)
      continue;
    const Eigen::VectorXd beta = qr.solve(y);
    LinearModel lm;
    int c = 0;
    lm.uses_g = cand.g;
    lm.uses_t = cand.t;
    if (cand.g) lm.a = beta(c++);
    if (cand.t) lm.b = beta(c++);
    lm.c = beta(c);
    lm.residual_rms = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(m));
    if (cols == 3)
      return lm;
    if (!best || lm.residual_rms < best->residual_rms ||
        (best->uses_g + best->uses_t < lm.uses_g + lm.uses_t &&
         lm.residual_rms <= best->residual_rms))
      best = lm;
  }
  if (notes)
    notes->push_back(std::string("rank-deficient design; fitted ") +
                     (best->uses_g ? "g+c" : best->uses_t ? "t+c" : "c only"));
  return *best;
}

inline ReconResult linear_fit_predict(const SampleSet& s)
{
  ReconResult r;
  r.method = Method::Linear;
  const LinearModel lm = fit_linear(s, &r.notes);
  r.linear = lm;
  r.profile = detail::fill_missing(s, [&](std::size_t g, std::size_t t) {
    return lm.predict(static_cast<double>(g), static_cast<double>(t));
  });
  return r;
}

// ---------------------------------------------------------------------------
// Nearest neighbour interpolation

namespace detail {

/// Index of the sample nearest to (g, t) under the metric, skipping `exclude`.
/// Samples are in canonical (t, g) order; the scan walks outwards in time and
/// stops once the time term alone exceeds the best distance. Equal distances
/// resolve to the lower sample index.
inline std::size_t nearest_sample(std::span<const Sample> e, double a, double b, std::size_t g,
                                  std::size_t t, std::size_t exclude = static_cast<std::size_t>(-1))
{
  const auto start = static_cast<std::size_t>(
    std::lower_bound(e.begin(), e.end(), t, [](const Sample& s, std::size_t tt) { return s.t < tt; }) -
    e.begin());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = static_cast<std::size_t>(-1);
  const auto consider = [&](std::size_t i) {
    if (i == exclude)
      return;
    const double dg = static_cast<double>(e[i].g) - static_cast<double>(g);
    const double dt = static_cast<double>(e[i].t) - static_cast<double>(t);
    const double d = a * dg * dg + b * dt * dt;
    if (d < best || (d == best && i < best_i)) {
      best = d;
      best_i = i;
    }
  };
  const auto time_term = [&](std::size_t i) {
    const double dt = static_cast<double>(e[i].t) - static_cast<double>(t);
    return b * dt * dt;
  };
  for (std::size_t i = start; i < e.size(); ++i) {
    if (time_term(i) > best)
      break;
    consider(i);
  }
  for (std::size_t i = start; i-- > 0;) {
    if (time_term(i) > best)
      break;
    consider(i);
  }
  return best_i;
}

inline double nni_loo_rms(std::span<const Sample> e, double a, double b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::size_t j = nearest_sample(e, a, b, e[i].g, e[i].t, i);
    const double d = e[j].x - e[i].x;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(e.size()));
}

} // namespace detail

/// a/b ratios searched by nni_fit: 10^-3 .. 10^3 in half-decade steps.
inline std::vector<double> nni_ratio_grid()
{
  std::vector<double> r;
  for (int i = -6; i <= 6; ++i)
    r.push_back(std::pow(10.0, 0.5 * i));
  return r;
}

inline NniMetric metric_from_ratio(double ratio)
{
  NniMetric m;
  m.a = ratio / (1.0 + ratio);
  m.b = 1.0 / (1.0 + ratio);
  return m;
}

/**
 * Chooses the metric weights by leave-one-out: every grid ratio a/b is scored
 * by the RMS error of predicting each sample from its nearest other sample.
 * Equal scores resolve toward the most anisotropic ratio (then the smaller one).
 */
inline NniMetric nni_fit(const SampleSet& s)
{
  detail::require_samples(s, 4, "nearest-neighbour metric fitting");
  const auto e = s.entries();
  const bool one_g = std::all_of(e.begin(), e.end(), [&](const Sample& x) { return x.g == e[0].g; });
  const bool one_t = std::all_of(e.begin(), e.end(), [&](const Sample& x) { return x.t == e[0].t; });
  if (one_g && one_t)
    throw Error("degenerate_samples", "all samples fall in one cell");

  std::optional<NniMetric> best;
  double best_ratio = 1.0;
  for (double ratio : nni_ratio_grid()) {
    NniMetric m = metric_from_ratio(ratio);
    m.loo_rms = detail::nni_loo_rms(e, m.a, m.b);
    bool take = !best;
    if (best) {
      const double tol = 1e-12 * std::max(1.0, best->loo_rms);
      if (m.loo_rms < best->loo_rms - tol)
        take = true;
      else if (std::abs(m.loo_rms - best->loo_rms) <= tol) {
        const double la = std::abs(std::log(ratio)), lb = std::abs(std::log(best_ratio));
        take = la > lb + 1e-12;
      }
    }
    if (take) {
      best = m;
      best_ratio = ratio;
    }
  }
  return *best;
}

inline ReconResult nni_predict(const SampleSet& s, const NniMetric& m)
{
  detail::require_samples(s, 1, "nearest-neighbour interpolation");
  if (m.a < 0.0 || m.b < 0.0 || !(m.a + m.b > 0.0))
    throw Error("bad_metric", "metric weights must be non-negative with a positive sum");
  ReconResult r;
  r.method = Method::NearestNeighbor;
  r.metric = m;
  const auto e = s.entries();
  r.profile = detail::fill_missing(s, [&](std::size_t g, std::size_t t) {
    return e[detail::nearest_sample(e, m.a, m.b, g, t)].x;
  });
  return r;
}

inline ReconResult nni_fit_predict(const SampleSet& s)
{
  if (s.size() < 4) {
    ReconResult r = nni_predict(s, NniMetric{});
    r.notes.push_back("fewer than 4 samples; isotropic metric used");
    return r;
  }
  try {
    return nni_predict(s, nni_fit(s));
  } catch (const Error& err) {
    if (err.code() != "degenerate_samples")
      throw;
    ReconResult r = nni_predict(s, NniMetric{});
    r.notes.push_back("all samples in one cell; isotropic metric used");
    return r;
  }
}

// ---------------------------------------------------------------------------
// Gaussian process interpolation

struct GpOptions
{
  std::size_t fit_subsample = 200; ///< samples used for marginal-likelihood fitting
  int max_evaluations = 200;       ///< per Nelder-Mead start
  bool compute_std = true;
  std::optional<GpHyper> fixed;    ///< skip fitting and use these
};

inline double se_kernel(const GpHyper& h, double dg, double dt)
{
  return h.signal_var *
         std::exp(-0.5 * (dg * dg / (h.length_g * h.length_g) + dt * dt / (h.length_t * h.length_t)));
}

namespace detail {

struct Point2
{
  double g, t;
};

inline Eigen::MatrixXd gram(std::span<const Point2> p, const GpHyper& h)
{
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = h.signal_var + h.noise_var;
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto& a = p[static_cast<std::size_t>(i)];
      const auto& b = p[static_cast<std::size_t>(j)];
      K(i, j) = K(j, i) = se_kernel(h, a.g - b.g, a.t - b.t);
    }
  }
  return K;
}

/// Cholesky with jitter escalation 1e-8 .. 1e-4 (relative to the signal variance).
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(Eigen::MatrixXd K, double scale, double* jitter_used = nullptr)
{
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) {
    if (jitter_used) *jitter_used = 0.0;
    return llt;
  }
  for (double jitter = 1e-8; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter * scale;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  throw Error("not_positive_definite", "GP covariance is not positive definite even with jitter");
}

inline double neg_log_marginal(std::span<const Point2> p, const Eigen::VectorXd& y, const GpHyper& h)
{
  Eigen::LLT<Eigen::MatrixXd> llt(gram(p, h));
  if (llt.info() != Eigen::Success)
    return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * y.dot(alpha) + 0.5 * logdet +
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

/// Plain Nelder-Mead on R^n.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step, int max_eval,
                                       double* fbest = nullptr)
{
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i)
    simplex[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  int evals = 0;
  for (std::size_t i = 0; i <= n; ++i, ++evals)
    fv[i] = f(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  while (evals < max_eval) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = order[0], hi = order[n], nh = order[n - 1];
    if (std::abs(fv[hi] - fv[lo]) <= 1e-9 * (std::abs(fv[lo]) + 1e-9))
      break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != hi)
        for (std::size_t d = 0; d < n; ++d)
          centroid[d] += simplex[i][d] / static_cast<double>(n);
    const auto along = [&](double coef) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d)
        p[d] = centroid[d] + coef * (simplex[hi][d] - centroid[d]);
      return p;
    };
    auto xr = along(-1.0);
    const double fr = f(xr); ++evals;
    if (fr < fv[lo]) {
      auto xe = along(-2.0);
      const double fe = f(xe); ++evals;
      if (fe < fr) { simplex[hi] = xe; fv[hi] = fe; }
      else { simplex[hi] = xr; fv[hi] = fr; }
    } else if (fr < fv[nh]) {
      simplex[hi] = xr; fv[hi] = fr;
    } else {
      const bool outside = fr < fv[hi];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = f(xc); ++evals;
      if (fc < (outside ? fr : fv[hi])) {
        simplex[hi] = xc; fv[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (std::size_t d = 0; d < n; ++d)
            simplex[i][d] = simplex[lo][d] + 0.5 * (simplex[i][d] - simplex[lo][d]);
          fv[i] = f(simplex[i]); ++evals;
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  if (fbest) *fbest = fv[best];
  return simplex[best];
}

} // namespace detail

/**
 * Fits the squared-exponential hyperparameters (length scales in g and t,
 * signal and noise variance) by maximising the log marginal likelihood with a
 * multi-start Nelder-Mead search in log space. The mean is the sample mean.
 * Large sample sets are cut to a contiguous central run of samples for the search.
 */
inline GpHyper gp_fit(const SampleSet& s, const GpOptions& opt = {})
{
  detail::require_samples(s, 2, "Gaussian process interpolation");
  const auto e = s.entries();
  const auto& l = s.lattice();
  double mean = 0.0;
  for (const auto& x : e) mean += x.x;
  mean /= static_cast<double>(e.size());

  std::vector<detail::Point2> pts;
  std::vector<double> ys;
  const std::size_t m = std::min(e.size(), std::max<std::size_t>(opt.fit_subsample, 2));
  // a contiguous run keeps close neighbours together, which is what pins the length scales
  const std::size_t first = (e.size() - m) / 2;
  for (std::size_t i = first; i < first + m; ++i) {
    pts.push_back({static_cast<double>(e[i].g), static_cast<double>(e[i].t)});
    ys.push_back(e[i].x - mean);
  }
  Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  double var = y.squaredNorm() / static_cast<double>(y.size());
  if (!(var > 1e-12))
    var = 1e-12;

  const double max_g = std::max(1.0, static_cast<double>(l.n_s));
  const double max_t = std::max(1.0, static_cast<double>(l.n_t));
  const std::array<double, 4> lo = {std::log(0.1), std::log(0.1), std::log(1e-4 * var), std::log(1e-6 * var)};
  const std::array<double, 4> hi = {std::log(10.0 * max_g), std::log(10.0 * max_t), std::log(10.0 * var), std::log(10.0 * var)};
  const auto unpack = [&](const std::vector<double>& th) {
    GpHyper h;
    h.length_g = std::exp(std::clamp(th[0], lo[0], hi[0]));
    h.length_t = std::exp(std::clamp(th[1], lo[1], hi[1]));
    h.signal_var = std::exp(std::clamp(th[2], lo[2], hi[2]));
    h.noise_var = std::exp(std::clamp(th[3], lo[3], hi[3]));
    h.mean = mean;
    return h;
  };
  const auto objective = [&](const std::vector<double>& th) {
    double penalty = 0.0;
    for (std::size_t d = 0; d < 4; ++d) {
      if (th[d] < lo[d]) penalty += (lo[d] - th[d]) * (lo[d] - th[d]);
      if (th[d] > hi[d]) penalty += (th[d] - hi[d]) * (th[d] - hi[d]);
    }
    return detail::neg_log_marginal(pts, y, unpack(th)) + 1e3 * penalty;
  };

  const std::vector<std::vector<double>> starts = {
    {std::log(1.0), std::log(1.0), std::log(var), std::log(0.1 * var)},
    {std::log(std::max(1.0, max_g / 2)), std::log(std::max(1.0, max_t / 20)), std::log(var), std::log(0.01 * var)},
    {std::log(0.5), std::log(std::max(1.0, max_t / 4)), std::log(0.5 * var), std::log(0.5 * var)},
  };
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<double> best_th = starts.front();
  for (const auto& st : starts) {
    double f = 0.0;
    auto th = detail::nelder_mead(objective, st, 0.7, opt.max_evaluations, &f);
    if (f < best_f) {
      best_f = f;
      best_th = th;
    }
  }
  GpHyper h = unpack(best_th);
  h.log_marginal = -best_f;
  return h;
}

struct GpPosterior
{
  std::vector<double> mean;
  std::vector<double> variance; ///< latent (noise-free) posterior variance
  double jitter = 0.0;
};

/**
 * Conditional Gaussian at `query` cells given the observations:
 *   mean = mu + k^T Sigma^{-1} (x - mu),  var = sigma_f^2 - k^T Sigma^{-1} k
 * with Sigma = K + sigma_n^2 I.
 */
inline GpPosterior gp_posterior(const SampleSet& s, const GpHyper& h,
                                std::span<const std::pair<std::size_t, std::size_t>> query,
                                bool with_variance = true)
{
  detail::require_samples(s, 1, "Gaussian process prediction");
  if (!(h.length_g > 0 && h.length_t > 0 && h.signal_var > 0 && h.noise_var >= 0))
    throw Error("bad_hyperparameters", "GP hyperparameters must be positive");
  const auto e = s.entries();
  std::vector<detail::Point2> pts;
  pts.reserve(e.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) {
    pts.push_back({static_cast<double>(e[i].g), static_cast<double>(e[i].t)});
    y(static_cast<Eigen::Index>(i)) = e[i].x - h.mean;
  }
  GpPosterior post;
  const auto llt = detail::robust_cholesky(detail::gram(pts, h), h.signal_var, &post.jitter);
  const Eigen::VectorXd alpha = llt.solve(y);

  const auto n = static_cast<Eigen::Index>(e.size());
  const auto q = static_cast<Eigen::Index>(query.size());
  Eigen::MatrixXd Ks(n, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const auto [g, t] = query[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i)
      Ks(i, j) = se_kernel(h, pts[static_cast<std::size_t>(i)].g - static_cast<double>(g),
                           pts[static_cast<std::size_t>(i)].t - static_cast<double>(t));
  }
  const Eigen::VectorXd mean = Ks.transpose() * alpha;
  post.mean.resize(query.size());
  for (Eigen::Index j = 0; j < q; ++j)
    post.mean[static_cast<std::size_t>(j)] = h.mean + mean(j);
  if (with_variance) {
    const Eigen::MatrixXd V = llt.matrixL().solve(Ks);
    post.variance.resize(query.size());
    for (Eigen::Index j = 0; j < q; ++j)
      post.variance[static_cast<std::size_t>(j)] =
        std::max(0.0, h.signal_var - V.col(j).squaredNorm()); // round-off can go below zero
  }
  return post;
}

inline ReconResult gp_fit_predict(const SampleSet& s, const GpOptions& opt = {})
{
  ReconResult r;
  r.method = Method::GaussianProcess;
  const GpHyper h = opt.fixed ? *opt.fixed : gp_fit(s, opt);
  r.gp = h;
  if (s.size() > opt.fit_subsample && !opt.fixed)
    r.notes.push_back("hyperparameters fitted on " + std::to_string(opt.fit_subsample) +
                      " of " + std::to_string(s.size()) + " samples");
  const auto& l = s.lattice();
  r.profile = s.to_profile();
  std::vector<std::pair<std::size_t, std::size_t>> query;
  std::vector<std::size_t> where;
  for (std::size_t idx = 0; idx < l.size(); ++idx)
    if (opt.compute_std || !r.profile.defined(idx)) {
      query.push_back(l.cell(idx));
      where.push_back(idx);
    }
  const GpPosterior post = gp_posterior(s, h, query, opt.compute_std);
  if (post.jitter > 0.0)
    r.notes.push_back("covariance jitter " + std::to_string(post.jitter) + " applied");
  if (opt.compute_std)
    r.posterior_std.assign(l.size(), 0.0);
  for (std::size_t k = 0; k < where.size(); ++k) {
    const std::size_t idx = where[k];
    if (!r.profile.defined(idx))
      r.profile.values[idx] = post.mean[k];
    if (opt.compute_std)
      r.posterior_std[idx] = std::sqrt(post.variance[k]);
  }
  // observed cells keep their measured values
  for (const auto& x : s.entries())
    r.profile.at(x.g, x.t) = x.x;
  return r;
}

// ---------------------------------------------------------------------------
// l1-norm minimisation over the DCT basis

struct L1Options
{
  std::optional<double> epsilon;   ///< constraint radius; default 1e-6 * ||x_bar||
  int max_iterations = 10000;
  double tolerance = 1e-8;         ///< relative primal/dual residual threshold
  double rho = 0.0;                ///< initial penalty; 0 picks one from the data
  double relaxation = 1.6;         ///< over-relaxation factor in (0, 2)
  DctBasis::Layout layout = DctBasis::Layout::Flat;
};

/**
 * Basis pursuit: min ||v||_1 s.t. ||Psi_bar v - x_bar||_2 <= eps, where Psi_bar
 * keeps the rows of the DCT synthesis operator at the observed cells. Solved
 * by ADMM on the split v = z:
 *
 *   v <- P_C(z - u)          projection onto the data-consistent set
 *   z <- soft(v + u, 1/rho)
 *   u <- u + v - z
 *
 * Psi_bar has orthonormal rows, so P_C only rescales the residual on the
 * observed entries in signal space. The penalty rho is rebalanced whenever the
 * primal and dual residuals drift more than 10x apart. Convergence is declared
 * when both residuals fall below `tolerance` relative to the iterate norms.
 */
inline ReconResult l1_dct(const SampleSet& s, const L1Options& opt = {})
{
  detail::require_samples(s, 1, "l1 reconstruction");
  const auto& l = s.lattice();
  const DctBasis basis(l, opt.layout);
  const std::size_t n = l.size();
  const auto idx = s.indices();
  const auto xbar = s.values();

  double xnorm = 0.0;
  for (double v : xbar) xnorm += v * v;
  xnorm = std::sqrt(xnorm);
  const double eps = opt.epsilon.value_or(1e-6 * xnorm);

  std::vector<double> v(n, 0.0), z(n, 0.0), u(n, 0.0), w(n), tmp(n), zold(n);

  // Starting point: the minimum-energy consistent solution Psi^T (scatter x_bar).
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) w[idx[k]] = xbar[k];
  basis.forward(w, z);
  double rho = opt.rho;
  if (!(rho > 0.0)) {
    double zmax = 0.0;
    for (double c : z) zmax = std::max(zmax, std::abs(c));
    rho = zmax > 0.0 ? 0.1 / zmax : 1.0;
  }

  const auto project = [&](std::span<const double> in, std::span<double> out) {
    basis.inverse(in, w);
    double rn = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double r = w[idx[k]] - xbar[k];
      rn += r * r;
    }
    rn = std::sqrt(rn);
    if (rn <= eps) {
      std::copy(in.begin(), in.end(), out.begin());
      return;
    }
    const double shrink = 1.0 - eps / rn;
    for (std::size_t k = 0; k < idx.size(); ++k)
      w[idx[k]] -= (w[idx[k]] - xbar[k]) * shrink;
    basis.forward(w, out);
  };

  ReconResult r;
  r.method = Method::L1;
  auto& d = r.solver;
  d.epsilon = eps;
  d.converged = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] - u[i];
    project(tmp, v);
    zold = z;
    const double thr = 1.0 / rho;
    for (std::size_t i = 0; i < n; ++i) {
      const double vh = opt.relaxation * v[i] + (1.0 - opt.relaxation) * zold[i];
      const double a = vh + u[i];
      z[i] = a > thr ? a - thr : (a < -thr ? a + thr : 0.0);
      u[i] = a - z[i];
    }
    double pr = 0.0, dr = 0.0, nv = 0.0, nz = 0.0, nu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pr += (v[i] - z[i]) * (v[i] - z[i]);
      dr += (z[i] - zold[i]) * (z[i] - zold[i]);
      nv += v[i] * v[i];
      nz += z[i] * z[i];
      nu += u[i] * u[i];
    }
    pr = std::sqrt(pr);
    dr = rho * std::sqrt(dr);
    d.iterations = it;
    d.primal_residual = pr;
    d.dual_residual = dr;
    const double scale_p = std::sqrt(std::max(nv, nz));
    const double scale_d = rho * std::sqrt(nu);
    if (pr <= opt.tolerance * std::max(scale_p, 1e-300) &&
        dr <= opt.tolerance * std::max(scale_d, 1e-300)) {
      d.converged = true;
      break;
    }
    if (it % 10 == 0) {
      if (pr > 10.0 * dr) {
        rho *= 2.0;
        for (double& x : u) x *= 0.5;
      } else if (dr > 10.0 * pr) {
        rho *= 0.5;
        for (double& x : u) x *= 2.0;
      }
    }
  }
  // v is feasible by construction; report the signal it synthesises.
  basis.inverse(v, w);
  double cr = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k)
    cr += (w[idx[k]] - xbar[k]) * (w[idx[k]] - xbar[k]);
  d.constraint_residual = std::sqrt(cr);
  if (!d.converged)
    r.notes.push_back("ADMM stopped at the iteration limit");
  r.profile = devectorize(w, l);
  for (const auto& x : s.entries())
    r.profile.at(x.g, x.t) = x.x;
  return r;
}

struct ReconOptions
{
  L1Options l1;
  GpOptions gp;
};

inline ReconResult reconstruct(const SampleSet& s, Method m, const ReconOptions& opt = {})
{
  switch (m) {
    case Method::L1: return l1_dct(s, opt.l1);
    case Method::Linear: return linear_fit_predict(s);
    case Method::NearestNeighbor: return nni_fit_predict(s);
    default: return gp_fit_predict(s, opt.gp);
  }
}

} // namespace noisemap
