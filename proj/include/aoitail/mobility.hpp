#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "aoitail/params.hpp"
#include "aoitail/rng.hpp"

namespace aoitail {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm_l2(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm_l1(Vec2 a) { return std::abs(a.x) + std::abs(a.y); }

// Square area covered by evenly spaced horizontal and vertical streets,
// including streets along all four edges.
class RoadGrid {
 public:
  static constexpr double kLaneTol = 1e-6;  // how close to a street counts as on it

  RoadGrid(double side_m, double spacing_m) : side_(side_m), spacing_(spacing_m) {
    const double ratio = side_m / spacing_m;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw std::invalid_argument("street spacing must divide the area side");
    streets_ = static_cast<int>(std::llround(ratio)) + 1;
  }

  double side() const { return side_; }
  double spacing() const { return spacing_; }
  int streets() const { return streets_; }  // per orientation
  double street_coord(int j) const { return j * spacing_; }

  // Index of the street at coordinate c, or -1 if c is off-street.
  int street_index(double c) const {
    const int j = static_cast<int>(std::llround(c / spacing_));
    if (j < 0 || j >= streets_) return -1;
    return std::abs(c - j * spacing_) <= kLaneTol ? j : -1;
  }

 private:
  double side_;
  double spacing_;
  int streets_;
};

// Kinematic state of a vehicle locked to the grid. axis 0 travels along x on
// a horizontal street (y fixed); axis 1 travels along y on a vertical street.
struct LaneState {
  int axis = 0;
  int street = 0;  // index of the street the vehicle is on
  int dir = 1;     // +1 or -1 along the moving axis
  double pos = 0;  // coordinate on the moving axis
};

inline Vec2 lane_point(const RoadGrid& grid, const LaneState& s) {
  const double fixed = grid.street_coord(s.street);
  return s.axis == 0 ? Vec2{s.pos, fixed} : Vec2{fixed, s.pos};
}

// Transmitters drive the grid; each receiver replays its transmitter's
// trajectory with a fixed slot delay, so the pair keeps a constant arc-length
// separation along the path driven.
class MobilityModel {
 public:
  MobilityModel(const RoadGrid& grid, int pairs, double gap_m, double speed_mps,
                double slot_s, Rng& placement)
      : grid_(grid), step_m_(speed_mps * slot_s) {
    lag_ = static_cast<int>(std::ceil(gap_m / step_m_));
    if (lag_ < 1) lag_ = 1;
    if (lag_ * step_m_ >= grid.side())
      throw std::invalid_argument("area side too small for the pair gap at this speed");
    tx_.resize(pairs);
    tx_pos_.resize(pairs);
    rx_pos_.resize(pairs);
    history_.assign(static_cast<std::size_t>(pairs) * (lag_ + 1), Vec2{});
    head_ = 0;
    for (int k = 0; k < pairs; ++k) {
      LaneState s;
      s.axis = static_cast<int>(placement.index(2));
      s.street = static_cast<int>(placement.index(grid.streets()));
      s.dir = placement.uniform() < 0.5 ? 1 : -1;
      // Keep the back-filled trajectory inside the area: the receiver starts
      // lag slots behind on the same street.
      const double back = lag_ * step_m_;
      const double u = placement.uniform(back, grid.side());
      s.pos = s.dir > 0 ? u : grid.side() - u;
      place_pair(k, s);
    }
  }

  int pairs() const { return static_cast<int>(tx_.size()); }
  int lag_slots() const { return lag_; }
  double step_m() const { return step_m_; }
  const RoadGrid& grid() const { return grid_; }

  Vec2 tx(int k) const { return tx_pos_[k]; }
  Vec2 rx(int k) const { return rx_pos_[k]; }
  Vec2 midpoint(int k) const { return 0.5 * (tx_pos_[k] + rx_pos_[k]); }
  const LaneState& tx_lane(int k) const { return tx_[k]; }

  // Places pair k's transmitter and rebuilds its replay ring as if it had
  // been driving straight; also the init path, and handy for targeted tests.
  void place_pair(int k, const LaneState& s) {
    tx_[k] = s;
    for (int j = 0; j <= lag_; ++j) {
      LaneState past = s;
      past.pos = s.pos - s.dir * j * step_m_;
      if (past.pos < -1e-9 || past.pos > grid_.side() + 1e-9)
        throw std::invalid_argument("straight back-fill leaves the area; place farther from the lane start");
      at(k, (head_ - j + lag_ + 1) % (lag_ + 1)) = lane_point(grid_, past);
    }
    tx_pos_[k] = lane_point(grid_, s);
    rx_pos_[k] = at(k, (head_ + 1) % (lag_ + 1));
  }

  // Advances every pair by one slot. Turn draws happen in pair order, so a
  // fixed stream reproduces the same trajectories run to run.
  void step(Rng& turns) {
    head_ = (head_ + 1) % (lag_ + 1);
    for (int k = 0; k < pairs(); ++k) {
      advance(tx_[k], step_m_, turns);
      tx_pos_[k] = lane_point(grid_, tx_[k]);
      at(k, head_) = tx_pos_[k];
      rx_pos_[k] = at(k, (head_ + 1) % (lag_ + 1));
    }
  }

 private:
  static constexpr double kSnapTol = 1e-9;

  Vec2& at(int k, int slot) { return history_[static_cast<std::size_t>(k) * (lag_ + 1) + slot]; }

  void advance(LaneState& v, double dist, Rng& turns) {
    while (dist > 0) {
      // Next crossing strictly ahead of the current position.
      const double q = v.pos / grid_.spacing();
      const int m = v.dir > 0 ? static_cast<int>(std::floor(q + kSnapTol)) + 1
                              : static_cast<int>(std::ceil(q - kSnapTol)) - 1;
      if (m < 0 || m >= grid_.streets())
        throw std::logic_error("vehicle heading out of the area; turn logic broke containment");
      const double cross = grid_.street_coord(m);
      const double gap = std::abs(cross - v.pos);
      if (gap > dist + kSnapTol) {
        v.pos += v.dir * dist;
        return;
      }
      v.pos = cross;
      dist -= gap;
      turn(v, m, turns);
    }
  }

  // Turn decision at a crossing: straight 1/2, each turn 1/4, with options
  // that would leave the area removed and the rest renormalized. m is the
  // index of the perpendicular street at the crossing.
  void turn(LaneState& v, int m, Rng& turns) {
    struct Option {
      LaneState state;
      double weight;
    };
    Option options[3];
    int count = 0;
    const double side = grid_.side();

    auto keep_if_inside = [&](LaneState cand, double w) {
      const double at_coord = cand.pos;
      if (cand.dir > 0 ? at_coord < side - kSnapTol : at_coord > kSnapTol)
        options[count++] = {cand, w};
    };

    keep_if_inside(v, 0.5);  // straight: state unchanged

    // Left turn rotates the heading counter-clockwise, right turn clockwise.
    // Either way the vehicle hops onto the perpendicular street m and starts
    // moving from the old street's coordinate.
    LaneState left = v, right = v;
    left.axis = right.axis = 1 - v.axis;
    left.street = right.street = m;
    left.pos = right.pos = grid_.street_coord(v.street);
    if (v.axis == 0) {
      left.dir = v.dir;
      right.dir = -v.dir;
    } else {
      left.dir = -v.dir;
      right.dir = v.dir;
    }
    keep_if_inside(left, 0.25);
    keep_if_inside(right, 0.25);

    double total = 0;
    for (int i = 0; i < count; ++i) total += options[i].weight;
    double u = turns.uniform() * total;
    for (int i = 0; i < count; ++i) {
      u -= options[i].weight;
      if (u <= 0 || i == count - 1) {
        v = options[i].state;
        return;
      }
    }
  }

  RoadGrid grid_;
  double step_m_;
  int lag_;
  std::vector<LaneState> tx_;
  std::vector<Vec2> tx_pos_;
  std::vector<Vec2> rx_pos_;
  std::vector<Vec2> history_;  // pairs x (lag+1) ring of past transmitter positions
  int head_;
};

}  // namespace aoitail
