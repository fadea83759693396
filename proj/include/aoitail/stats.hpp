#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <vector>

#include "aoitail/rng.hpp"

namespace aoitail {

// Running mean and variance (Welford).
struct Welford {
  long long n = 0;
  double mean = 0;
  double m2 = 0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

// Fixed-footprint histogram with logarithmic bins, for body quantiles of
// heavy-tailed positive values. Values at or below the low edge land in the
// first bin, values above the high edge in a dedicated overflow bin.
class LogHistogram {
 public:
  LogHistogram(double lo, double hi, int bins_per_decade = 48)
      : log_lo_(std::log10(lo)), log_hi_(std::log10(hi)),
        per_decade_(bins_per_decade) {
    if (!(lo > 0) || !(hi > lo)) throw std::invalid_argument("histogram bounds must satisfy 0 < lo < hi");
    bins_ = static_cast<int>(std::ceil((log_hi_ - log_lo_) * per_decade_)) + 1;
    counts_.assign(bins_ + 1, 0);  // last bin is overflow
  }

  void add(double x) {
    ++n_;
    if (!(x > 0)) {
      ++counts_[0];
      return;
    }
    const double lx = std::log10(x);
    if (lx >= log_hi_) {
      ++counts_.back();
      return;
    }
    int b = static_cast<int>(std::floor((lx - log_lo_) * per_decade_)) + 1;
    b = std::clamp(b, 0, bins_ - 1);
    ++counts_[b];
  }

  std::size_t count() const { return n_; }

  // Value with fraction q of the mass at or below it; geometric interpolation
  // inside a bin. The overflow bin returns its lower edge.
  double quantile(double q) const {
    if (n_ == 0) throw std::logic_error("histogram quantile: empty");
    if (!(q >= 0 && q <= 1)) throw std::invalid_argument("quantile level outside [0, 1]");
    const double target = q * static_cast<double>(n_);
    double cum = 0;
    for (int b = 0; b < static_cast<int>(counts_.size()); ++b) {
      const double prev = cum;
      cum += static_cast<double>(counts_[b]);
      if (cum >= target && counts_[b] > 0) {
        if (b == 0) return std::pow(10.0, log_lo_);
        if (b == static_cast<int>(counts_.size()) - 1) return std::pow(10.0, log_hi_);
        const double frac = std::clamp((target - prev) / static_cast<double>(counts_[b]), 0.0, 1.0);
        const double edge = log_lo_ + static_cast<double>(b - 1) / per_decade_;
        return std::pow(10.0, edge + frac / per_decade_);
      }
    }
    return std::pow(10.0, log_hi_);
  }

 private:
  double log_lo_;
  double log_hi_;
  int per_decade_;
  int bins_ = 0;
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

// Keeps the M largest values seen, exactly. Extreme upper quantiles then come
// from order statistics instead of histogram resolution.
class TopValues {
 public:
  explicit TopValues(std::size_t cap) : cap_(cap) {
    if (cap == 0) throw std::invalid_argument("top tracker needs capacity >= 1");
  }

  void add(double x) {
    if (heap_.size() < cap_) {
      heap_.push(x);
    } else if (x > heap_.top()) {
      heap_.pop();
      heap_.push(x);
    }
  }

  std::size_t size() const { return heap_.size(); }

  std::vector<double> sorted_desc() const {
    auto h = heap_;
    std::vector<double> v;
    v.reserve(h.size());
    while (!h.empty()) {
      v.push_back(h.top());
      h.pop();
    }
    std::reverse(v.begin(), v.end());
    return v;
  }

  // Upper quantile via order statistics: level q with (1-q) * n_total inside
  // the tracked tail. Callers must keep (1-q) * n_total <= size.
  double quantile(double q, std::size_t n_total) const {
    const auto v = sorted_desc();
    if (v.empty()) throw std::logic_error("top quantile: empty");
    const double rank = (1.0 - q) * static_cast<double>(n_total);
    std::size_t idx = rank <= 1.0 ? 0 : static_cast<std::size_t>(std::ceil(rank)) - 1;
    if (idx >= v.size())
      throw std::logic_error("top quantile: level deeper than tracked tail");
    return v[idx];
  }

 private:
  std::size_t cap_;
  std::priority_queue<double, std::vector<double>, std::greater<>> heap_;
};

// Uniform sample of a stream with a fixed cap (reservoir sampling).
class Reservoir {
 public:
  Reservoir(std::size_t cap, Rng& rng) : cap_(cap), rng_(&rng) {}

  void add(double x) {
    ++seen_;
    if (values_.size() < cap_) {
      values_.push_back(x);
      return;
    }
    const std::size_t j = rng_->index(seen_);
    if (j < cap_) values_[j] = x;
  }

  std::size_t seen() const { return seen_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t cap_;
  Rng* rng_;
  std::size_t seen_ = 0;
  std::vector<double> values_;
};

struct CcdfRow {
  double value;
  double prob;
};

// Complementary CDF read-out at log-spaced probability levels. Levels deep
// enough to fall inside the tracked top values use exact order statistics;
// the rest interpolate the histogram.
inline std::vector<CcdfRow> ccdf_table(const LogHistogram& hist, const TopValues& top,
                                       std::size_t n, int levels_per_decade = 8) {
  std::vector<CcdfRow> rows;
  if (n == 0) return rows;
  const double p_floor = std::max(10.0 / static_cast<double>(n), 1e-12);
  const int steps = static_cast<int>(std::ceil(-std::log10(p_floor) * levels_per_decade));
  for (int i = 0; i <= steps; ++i) {
    const double p = std::pow(10.0, -static_cast<double>(i) / levels_per_decade);
    if (p < p_floor) break;
    const double tail_rank = p * static_cast<double>(n);
    const double value = tail_rank <= static_cast<double>(top.size())
                             ? top.quantile(1.0 - p, n)
                             : hist.quantile(1.0 - p);
    rows.push_back({value, p});
  }
  return rows;
}

}  // namespace aoitail
