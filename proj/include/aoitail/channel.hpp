#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoitail/mobility.hpp"
#include "aoitail/params.hpp"
#include "aoitail/rng.hpp"

namespace aoitail {

enum class LinkClass { los, wlos, nlos };

// Geometric link classification on the street grid. Endpoints on a shared
// street, or on distinct parallel streets, see each other directly. Endpoints
// on perpendicular streets are in the weak line-of-sight class when either one
// is within the corner radius of their shared crossing, and blocked otherwise.
inline LinkClass classify(Vec2 a, Vec2 b, const RoadGrid& grid, double corner_radius_m) {
  const int ah = grid.street_index(a.y);  // horizontal street a sits on, if any
  const int av = grid.street_index(a.x);
  const int bh = grid.street_index(b.y);
  const int bv = grid.street_index(b.x);
  if ((ah < 0 && av < 0) || (bh < 0 && bv < 0))
    throw std::invalid_argument("classify: endpoint is not on any street");
  if (ah >= 0 && bh >= 0 && ah == bh) return LinkClass::los;
  if (av >= 0 && bv >= 0 && av == bv) return LinkClass::los;
  if (ah >= 0 && bh >= 0) return LinkClass::los;  // distinct parallel streets
  if (av >= 0 && bv >= 0) return LinkClass::los;
  // Perpendicular streets: distances to the shared crossing are exactly the
  // coordinate differences.
  const double dx = std::abs(a.x - b.x);
  const double dy = std::abs(a.y - b.y);
  return std::min(dx, dy) <= corner_radius_m ? LinkClass::wlos : LinkClass::nlos;
}

inline double pathloss(LinkClass cls, Vec2 a, Vec2 b, const SimParams& p) {
  const Vec2 d = a - b;
  switch (cls) {
    case LinkClass::los: {
      const double r = norm_l2(d);
      if (r <= 0) throw std::invalid_argument("pathloss: coincident endpoints");
      return p.pl_intercept * std::pow(r, -p.pl_exponent);
    }
    case LinkClass::wlos: {
      const double r = norm_l1(d);
      if (r <= 0) throw std::invalid_argument("pathloss: coincident endpoints");
      return p.pl_intercept * std::pow(r, -p.pl_exponent);
    }
    case LinkClass::nlos: {
      const double dx = std::abs(d.x);
      const double dy = std::abs(d.y);
      // A blocked link degenerates to the corner formula when one leg closes.
      if (dx <= RoadGrid::kLaneTol || dy <= RoadGrid::kLaneTol)
        return pathloss(LinkClass::wlos, a, b, p);
      return p.pl_intercept_nlos * std::pow(dx * dy, -p.pl_exponent);
    }
  }
  throw std::logic_error("unreachable");
}

inline double pathloss(Vec2 a, Vec2 b, const RoadGrid& grid, const SimParams& p) {
  return pathloss(classify(a, b, grid, p.intersection_radius_m), a, b, p);
}

// Per-slot power gains restricted to links that can actually interfere: for
// each resource block, the pairs scheduled on it and the full gain table
// among them. gain(n, i, j) is transmitter users(n)[i] into receiver
// users(n)[j]; the diagonal holds each pair's own link.
class SlotGains {
 public:
  void reset(const std::vector<std::vector<int>>& users) {
    users_ = &users;
    gains_.resize(users.size());
    for (std::size_t n = 0; n < users.size(); ++n)
      gains_[n].assign(users[n].size() * users[n].size(), 0.0);
  }

  const std::vector<int>& users(int n) const { return (*users_)[n]; }
  double gain(int n, int i, int j) const {
    const auto& u = (*users_)[n];
    return gains_[n][static_cast<std::size_t>(i) * u.size() + j];
  }
  double& gain(int n, int i, int j) {
    const auto& u = (*users_)[n];
    return gains_[n][static_cast<std::size_t>(i) * u.size() + j];
  }

 private:
  const std::vector<std::vector<int>>* users_ = nullptr;
  std::vector<std::vector<double>> gains_;
};

// Draws one slot of gains: slowly varying path loss from current positions
// times a unit-mean exponential fade drawn independently for every
// (transmitter, receiver, resource block) triple each slot. Path loss per
// ordered pair is computed once per slot and reused across blocks.
class GainComputer {
 public:
  explicit GainComputer(int max_pairs)
      : pairs_(max_pairs),
        pl_cache_(static_cast<std::size_t>(max_pairs) * max_pairs, 0.0),
        stamp_(static_cast<std::size_t>(max_pairs) * max_pairs, 0) {}

  void compute(SlotGains& out, const MobilityModel& mob,
               const std::vector<std::vector<int>>& users, const SimParams& p,
               Rng& fading) {
    ++epoch_;
    out.reset(users);
    for (std::size_t n = 0; n < users.size(); ++n) {
      const auto& u = users[n];
      for (std::size_t j = 0; j < u.size(); ++j) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          const double pl = cached_pathloss(mob, u[i], u[j], p);
          out.gain(static_cast<int>(n), static_cast<int>(i), static_cast<int>(j)) =
              pl * fading.exponential();
        }
      }
    }
  }

 private:
  double cached_pathloss(const MobilityModel& mob, int tx_pair, int rx_pair,
                         const SimParams& p) {
    const std::size_t idx = static_cast<std::size_t>(tx_pair) * pairs_ + rx_pair;
    if (stamp_[idx] != epoch_) {
      stamp_[idx] = epoch_;
      const Vec2 a = mob.tx(tx_pair);
      const Vec2 b = mob.rx(rx_pair);
      // Vehicles can momentarily overlap while passing through each other on
      // a shared street. The intercept is referenced to 1 m, so below that
      // separation the power-law stops meaning anything; clamp to it.
      pl_cache_[idx] = norm_l2(a - b) < 1.0 ? p.pl_intercept
                                            : pathloss(a, b, mob.grid(), p);
    }
    return pl_cache_[idx];
  }

  int pairs_;
  std::vector<double> pl_cache_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t epoch_ = 0;
};

// Packets deliverable in one slot over the given blocks: Shannon rate per
// block at the block's interference level, summed and scaled by slot length
// over packet size.
inline double rate_packets(std::span<const double> power_w, std::span<const double> own_gain,
                           std::span<const double> interference_w, const SimParams& p) {
  if (power_w.size() != own_gain.size() || power_w.size() != interference_w.size())
    throw std::invalid_argument("rate_packets: span sizes differ");
  const double noise_w = p.noise_psd_w_hz * p.rb_bandwidth_hz;
  double bits_per_s = 0;
  for (std::size_t n = 0; n < power_w.size(); ++n) {
    const double sinr = power_w[n] * own_gain[n] / (noise_w + interference_w[n]);
    bits_per_s += p.rb_bandwidth_hz * std::log2(1.0 + sinr);
  }
  return p.slot_s * bits_per_s / p.packet_bits;
}

}  // namespace aoitail
