#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace aoitail {

// Fluid-limit transmitter queue in packet units. Arrivals are deterministic at
// a fixed fractional rate per slot; service removes up to the slot's rate.
// Packet index i arrives at instant (i / A) * tau and departs at the end of
// the first slot whose cumulative served mass covers i + 1.
class PacketLedger {
 public:
  PacketLedger(double arrivals_per_slot, double slot_s, bool record = false)
      : per_slot_(arrivals_per_slot), slot_s_(slot_s), record_(record) {
    if (per_slot_ <= 0) throw std::invalid_argument("arrivals per slot must be positive");
  }

  double arrival_instant(long long i) const {
    return static_cast<double>(i) / per_slot_ * slot_s_;
  }

  // Called once per slot with the cumulative served mass; stamps departures
  // for every index newly covered. The 1e-9 slack absorbs float accumulation
  // when the per-slot rate is not exactly representable.
  void on_slot_served(double served_mass, double instant_s) {
    while (static_cast<double>(next_ + 1) <= served_mass + 1e-9) {
      if (record_) departures_.push_back(instant_s);
      ++next_;
    }
  }

  long long departed() const { return next_; }

  const std::vector<double>& departure_instants() const {
    if (!record_) throw std::logic_error("ledger built without departure recording");
    return departures_;
  }

  // Age of the newest departed packet at instant T, or nothing before the
  // first departure. Without recording the query is only valid at or after
  // the latest stamped instant (the live case in a running simulation).
  std::optional<double> age_at(double instant_s) const {
    long long newest;
    if (record_) {
      const auto it = std::upper_bound(departures_.begin(), departures_.end(), instant_s);
      newest = static_cast<long long>(it - departures_.begin()) - 1;
    } else {
      newest = next_ - 1;
    }
    if (newest < 0) return std::nullopt;
    return instant_s - arrival_instant(newest);
  }

 private:
  double per_slot_;
  double slot_s_;
  bool record_;
  long long next_ = 0;  // first index not yet departed
  std::vector<double> departures_;
};

class TransmitterQueue {
 public:
  TransmitterQueue(double arrivals_per_slot, double slot_s, bool record = false)
      : arrivals_(arrivals_per_slot), slot_s_(slot_s), ledger_(arrivals_per_slot, slot_s, record) {}

  double queue() const { return queue_; }       // backlog at the current slot start
  long long slot() const { return slot_; }
  double arrived_mass() const { return arrived_; }
  double served_mass() const { return served_; }
  const PacketLedger& ledger() const { return ledger_; }

  // One slot at the given service rate: drain up to rate, then take the
  // slot's arrivals. Departure instants are stamped at the slot end.
  void advance(double rate_pkts) {
    if (rate_pkts < 0) throw std::invalid_argument("negative service rate");
    const double served_now = std::min(queue_, rate_pkts);
    queue_ = queue_ - served_now + arrivals_;
    served_ += served_now;
    arrived_ += arrivals_;
    ++slot_;
    ledger_.on_slot_served(served_, static_cast<double>(slot_) * slot_s_);
  }

 private:
  double arrivals_;
  double slot_s_;
  double queue_ = 0;
  double arrived_ = 0;
  double served_ = 0;
  long long slot_ = 0;
  PacketLedger ledger_;
};

// Threshold event driving the tail model: the backlog exceeding what this
// slot's service can clear, offset by the margin. The excess is the amount
// over the threshold, squared form included since the controller tracks both.
struct ExcessEvent {
  bool triggered = false;
  double excess = 0;
  double excess_sq = 0;
};

inline ExcessEvent excess_event(double queue_pkts, double rate_pkts, double margin_pkts) {
  ExcessEvent ev;
  if (queue_pkts > rate_pkts - margin_pkts) {
    ev.triggered = true;
    ev.excess = queue_pkts - rate_pkts + margin_pkts;
    ev.excess_sq = ev.excess * ev.excess;
  }
  return ev;
}

// Index of the first packet that must have departed by instant T for the age
// at T to be within the deadline: ceil(A/tau * (T - d)), snapped to the exact
// integer when the product is one up to rounding noise.
inline long long freshness_index(double instant_s, double age_limit_s,
                                 double arrivals_per_s) {
  const double v = arrivals_per_s * (instant_s - age_limit_s);
  const double r = std::round(v);
  if (std::abs(v - r) < 1e-9 * std::max(1.0, std::abs(v)))
    return static_cast<long long>(r);
  return static_cast<long long>(std::ceil(v));
}

// Paired per-slot counts of the age process missing its deadline and of the
// queue-threshold event that is meant to bound it from above.
struct BoundTally {
  long long slots = 0;
  long long age_violations = 0;
  long long queue_events = 0;

  void add(bool age_violated, bool queue_event) {
    ++slots;
    if (age_violated) ++age_violations;
    if (queue_event) ++queue_events;
  }

  double age_freq() const { return slots ? static_cast<double>(age_violations) / slots : 0.0; }
  double queue_freq() const { return slots ? static_cast<double>(queue_events) / slots : 0.0; }

  // Standard error of a frequency estimate from n Bernoulli draws.
  static double freq_se(double freq, long long n) {
    return n ? std::sqrt(std::max(freq * (1.0 - freq), 0.0) / n) : 0.0;
  }

  // Too few conditioning events to trust the comparison.
  bool low_confidence() const { return queue_events < 1000; }
};

}  // namespace aoitail
