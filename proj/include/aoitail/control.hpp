#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoitail/queueing.hpp"

namespace aoitail {

// Virtual queues tracking long-run constraint slack. Each grows by its slot
// cost and is clipped at zero, so a bounded time-average certifies the
// matching constraint holds on average.
struct VirtualQueues {
  double excess_mean = 0;   // mean of threshold excesses vs. its cap
  double excess_sq = 0;     // second moment of excesses vs. its cap
  double rate_deficit = 0;  // served vs. arrived packets (stability)
  double violation = 0;     // event frequency vs. the tolerance
};

inline VirtualQueues update_virtual(const VirtualQueues& j, const ExcessEvent& ev,
                                    double rate_pkts, double arrivals_pkts,
                                    double tolerance, double mean_cap,
                                    double moment2_cap) {
  VirtualQueues out;
  const double ind = ev.triggered ? 1.0 : 0.0;
  out.excess_mean = std::max(j.excess_mean + (ev.excess - mean_cap) * ind, 0.0);
  out.excess_sq = std::max(j.excess_sq + (ev.excess_sq - moment2_cap) * ind, 0.0);
  out.rate_deficit = std::max(j.rate_deficit - rate_pkts + arrivals_pkts, 0.0);
  out.violation = std::max(j.violation + rate_pkts * ind - rate_pkts * tolerance, 0.0);
  return out;
}

// Marginal value of one packet of service this slot, from the one-step drift
// of the virtual queues plus the backlog terms. The event indicator is
// evaluated against a rate known before this slot's powers are chosen
// (normally the previous slot's realized rate). A deeply backed-off state can
// push the bracket negative, where zero power is already optimal, so the
// weight is clipped at zero to keep the allocator's precondition.
inline double drift_weight(const VirtualQueues& j, double queue_pkts, double known_rate_pkts,
                           double arrivals_pkts, double tolerance, double margin_pkts,
                           double slot_s, double rb_bandwidth_hz, double packet_bits) {
  const double shifted = queue_pkts + margin_pkts;
  double w = j.rate_deficit + arrivals_pkts + queue_pkts + j.violation * tolerance;
  if (queue_pkts > known_rate_pkts - margin_pkts) {
    w += -j.violation + j.excess_mean + (2.0 * j.excess_sq + 1.0) * shifted +
         2.0 * shifted * shifted * shifted;
  }
  return std::max(slot_s * rb_bandwidth_hz / packet_bits * w, 0.0);
}

struct PowerDecision {
  std::vector<double> power_w;  // aligned with the caller's block list
  double multiplier = 0;        // budget multiplier when it binds, 0 if slack

  double total() const {
    double s = 0;
    for (double p : power_w) s += p;
    return s;
  }
};

// Water-filling over the pair's blocks: on block n a positive allocation
// satisfies weight / ((v + multiplier) ln 2) = P_n + (noise + I_n)/gain_n,
// with the multiplier raised just enough to fit inside the power budget.
// v = 0 means power itself carries no cost, so any positive weight spends the
// whole budget and the multiplier alone sets the water level.
inline PowerDecision waterfill(double weight, std::span<const double> own_gain,
                               std::span<const double> interference_w, double v,
                               double max_power_w, double noise_w) {
  if (weight < 0) throw std::invalid_argument("waterfill: negative weight");
  if (own_gain.size() != interference_w.size())
    throw std::invalid_argument("waterfill: span sizes differ");
  if (!(max_power_w > 0)) throw std::invalid_argument("waterfill: budget must be positive");

  PowerDecision dec;
  dec.power_w.assign(own_gain.size(), 0.0);
  if (own_gain.empty() || weight == 0) return dec;

  const double ln2 = std::log(2.0);
  std::vector<double> cost(own_gain.size());
  for (std::size_t n = 0; n < own_gain.size(); ++n) {
    if (!(own_gain[n] > 0)) throw std::invalid_argument("waterfill: gains must be positive");
    if (interference_w[n] < 0) throw std::invalid_argument("waterfill: negative interference");
    cost[n] = (noise_w + interference_w[n]) / own_gain[n];
  }

  if (v > 0) {  // check whether the unconstrained optimum already fits
    const double level0 = weight / (v * ln2);
    double sum0 = 0;
    for (std::size_t n = 0; n < cost.size(); ++n) {
      dec.power_w[n] = std::max(level0 - cost[n], 0.0);
      sum0 += dec.power_w[n];
    }
    if (sum0 <= max_power_w) return dec;  // budget slack
  }

  // The budget binds. Funding the m cheapest blocks puts the water level at
  // (budget + their cost sum) / m, and the choice of m is consistent while
  // that level clears the m-th cost; once it fails it fails for every larger
  // m, so one prefix scan finds the level in closed form. Iterating on the
  // multiplier instead cannot hold the budget to tolerance when costs dwarf
  // the budget, because the allocation is then a difference of nearly equal
  // large numbers.
  std::vector<double> sorted(cost);
  std::sort(sorted.begin(), sorted.end());
  double prefix = 0, level = 0;
  for (std::size_t m = 0; m < sorted.size(); ++m) {
    prefix += sorted[m];
    const double trial = (max_power_w + prefix) / static_cast<double>(m + 1);
    if (trial <= sorted[m]) break;
    level = trial;
  }
  double sum = 0;
  for (std::size_t n = 0; n < cost.size(); ++n) {
    dec.power_w[n] = std::max(level - cost[n], 0.0);
    sum += dec.power_w[n];
  }
  // The cheapest block is always funded, so sum > 0; rescaling pins the total
  // to the budget against rounding in the level.
  const double scale = max_power_w / sum;
  for (double& p : dec.power_w) p *= scale;
  dec.multiplier = weight / (level * ln2) - v;
  return dec;
}

// Reference policies. Both spend a fixed budget spread evenly across the
// pair's blocks.
inline PowerDecision uniform_full_power(std::size_t blocks, double max_power_w) {
  PowerDecision dec;
  if (blocks) dec.power_w.assign(blocks, max_power_w / static_cast<double>(blocks));
  return dec;
}

inline PowerDecision fixed_power(std::size_t blocks, double level_w, double max_power_w) {
  PowerDecision dec;
  if (blocks)
    dec.power_w.assign(blocks, std::min(level_w, max_power_w) / static_cast<double>(blocks));
  return dec;
}

// Per (pair, block) interference estimate available at decision time: an
// exponential moving average of measured interference, or a fixed constant
// when the scenario pins it.
class InterferenceEstimator {
 public:
  InterferenceEstimator(int pairs, int blocks, double alpha,
                        std::optional<double> fixed = std::nullopt)
      : blocks_(blocks), alpha_(alpha), fixed_(fixed),
        ema_(static_cast<std::size_t>(pairs) * blocks, 0.0) {}

  double get(int pair, int block) const {
    if (fixed_) return *fixed_;
    return ema_[static_cast<std::size_t>(pair) * blocks_ + block];
  }

  void observe(int pair, int block, double measured_w) {
    double& v = ema_[static_cast<std::size_t>(pair) * blocks_ + block];
    v += alpha_ * (measured_w - v);
  }

 private:
  int blocks_;
  double alpha_;
  std::optional<double> fixed_;
  std::vector<double> ema_;
};

}  // namespace aoitail
