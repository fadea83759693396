#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoitail {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Generalized Pareto with location zero. shape < 0 puts a finite endpoint at
// -scale/shape; shape inside kShapeZero of zero is treated as the exponential
// limit so both branches agree numerically at the boundary.
struct GpdParams {
  double scale = 1.0;
  double shape = 0.0;
};

inline constexpr double kShapeZero = 1e-8;

inline void check_gpd(const GpdParams& g) {
  if (!(g.scale > 0)) throw std::domain_error("gpd: scale must be positive");
  if (!(g.shape < 0.5)) throw std::domain_error("gpd: shape must be below 1/2");
}

inline double gpd_cdf(double x, const GpdParams& g) {
  check_gpd(g);
  if (x <= 0) return 0.0;
  if (std::abs(g.shape) < kShapeZero) return -std::expm1(-x / g.scale);
  const double z = g.shape * x / g.scale;
  if (1.0 + z <= 0) return 1.0;  // beyond the finite endpoint (shape < 0)
  return -std::expm1(-std::log1p(z) / g.shape);
}

inline double gpd_ccdf(double x, const GpdParams& g) {
  check_gpd(g);
  if (x <= 0) return 1.0;
  if (std::abs(g.shape) < kShapeZero) return std::exp(-x / g.scale);
  const double z = g.shape * x / g.scale;
  if (1.0 + z <= 0) return 0.0;
  return std::exp(-std::log1p(z) / g.shape);
}

inline double gpd_quantile(double p, const GpdParams& g) {
  check_gpd(g);
  if (!(p >= 0 && p < 1)) throw std::domain_error("gpd: quantile level must be in [0, 1)");
  if (std::abs(g.shape) < kShapeZero) return -g.scale * std::log1p(-p);
  return g.scale / g.shape * (std::pow(1.0 - p, -g.shape) - 1.0);
}

struct GpdMoments {
  double mean;
  double variance;
};

inline GpdMoments gpd_moments(const GpdParams& g) {
  check_gpd(g);
  const double one_minus = 1.0 - g.shape;
  return {g.scale / one_minus,
          g.scale * g.scale / (one_minus * one_minus * (1.0 - 2.0 * g.shape))};
}

// Largest absolute gap between the model CDF and the empirical CDF evaluated
// at the sample points (both one-sided gaps checked at each point).
inline double ks_distance(std::span<const double> samples, const GpdParams& g) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = gpd_cdf(s[i], g);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

enum class FitMethod { moments, mle };

struct FitReport {
  GpdParams params;
  std::size_t n = 0;
  double ks = 0;
  FitMethod method = FitMethod::moments;
};

namespace detail {

struct SampleStats {
  double mean;
  double var;  // unbiased
  double max;
};

inline SampleStats sample_stats(std::span<const double> x, std::size_t floor) {
  if (x.size() < floor)
    throw FitError("too few excess samples to fit: " + std::to_string(x.size()) +
                   " < " + std::to_string(floor));
  double sum = 0, mx = 0;
  for (double v : x) {
    if (!(v > 0)) throw FitError("excess samples must be positive");
    sum += v;
    mx = std::max(mx, v);
  }
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(x.size() - 1);
  if (!(var > 0)) throw FitError("degenerate excess samples: zero variance");
  return {mean, var, mx};
}

}  // namespace detail

// Method-of-moments fit: shape = (1 - mean^2/var) / 2, scale = mean * (1 - shape).
// Inverting the moment formulas exactly, so fitting the moments of a known
// model returns that model.
inline FitReport fit_moments(std::span<const double> samples, std::size_t floor = 100) {
  const auto st = detail::sample_stats(samples, floor);
  GpdParams g;
  g.shape = 0.5 * (1.0 - st.mean * st.mean / st.var);
  g.scale = st.mean * (1.0 - g.shape);
  check_gpd(g);
  return {g, samples.size(), ks_distance(samples, g), FitMethod::moments};
}

// Likelihood refinement of the moment fit. The likelihood is profiled down to
// the single ratio theta = shape/scale: for a given theta the shape maximizing
// it is the mean of log1p(theta x), which leaves a one-dimensional Newton
// search. Guarded steps keep theta inside (-1/max x, inf).
inline FitReport fit_mle(std::span<const double> samples, std::size_t floor = 100) {
  const auto start = fit_moments(samples, floor);
  const auto st = detail::sample_stats(samples, floor);
  const double theta_lo = -(1.0 - 1e-10) / st.max;

  // Profile shape and the first two derivative sums at theta.
  auto sums = [&](double th, double& s1, double& s2, double& s3) {
    s1 = s2 = s3 = 0;
    for (double v : samples) {
      const double w = 1.0 + th * v;
      s1 += std::log1p(th * v);
      s2 += v / w;
      s3 += v * v / (w * w);
    }
    const double n = static_cast<double>(samples.size());
    s1 /= n;
    s2 /= n;
    s3 /= n;
  };

  double theta = start.params.shape / start.params.scale;
  if (theta <= theta_lo) theta = 0.5 * theta_lo;
  if (std::abs(theta) < 1e-14) theta = 1e-14;

  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    double s1, s2, s3;
    sums(theta, s1, s2, s3);
    if (std::abs(s1) < 1e-300) break;  // flat profile, keep current point
    const double grad = -s2 / s1 + 1.0 / theta - s2;
    const double hess = (s3 * s1 + s2 * s2) / (s1 * s1) - 1.0 / (theta * theta) + s3;
    if (!(std::abs(hess) > 0)) break;
    double next = theta - grad / hess;
    if (next <= theta_lo) next = 0.5 * (theta + theta_lo);
    if (std::abs(next) < 1e-14) next = theta > 0 ? 1e-14 : -1e-14;
    const double delta = std::abs(next - theta);
    theta = next;
    if (delta <= 1e-8 * (1.0 + std::abs(theta))) {
      converged = true;
      break;
    }
  }
  if (!converged) throw FitError("likelihood refinement did not converge in 100 iterations");

  double s1, s2, s3;
  sums(theta, s1, s2, s3);
  GpdParams g;
  g.shape = s1;
  g.scale = std::abs(g.shape) < kShapeZero ? st.mean : g.shape / theta;
  check_gpd(g);
  return {g, samples.size(), ks_distance(samples, g), FitMethod::mle};
}

inline double gpd_log_likelihood(std::span<const double> samples, const GpdParams& g) {
  check_gpd(g);
  double ll = 0;
  for (double x : samples) {
    if (!(x > 0)) throw std::invalid_argument("log-likelihood: samples must be positive");
    if (std::abs(g.shape) < kShapeZero) {
      ll += -std::log(g.scale) - x / g.scale;
    } else {
      const double z = g.shape * x / g.scale;
      if (1.0 + z <= 0) return -std::numeric_limits<double>::infinity();
      ll += -std::log(g.scale) - (1.0 / g.shape + 1.0) * std::log1p(z);
    }
  }
  return ll;
}

}  // namespace aoitail
