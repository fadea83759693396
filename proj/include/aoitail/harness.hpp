#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aoitail/channel.hpp"
#include "aoitail/clustering.hpp"
#include "aoitail/control.hpp"
#include "aoitail/gpd.hpp"
#include "aoitail/mobility.hpp"
#include "aoitail/params.hpp"
#include "aoitail/queueing.hpp"
#include "aoitail/rng.hpp"
#include "aoitail/stats.hpp"

namespace aoitail {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { proposed, uniform, fixed };

struct Policy {
  PolicyKind kind = PolicyKind::proposed;
  double fixed_power_w = 0;
};

inline std::string policy_name(const Policy& p) {
  switch (p.kind) {
    case PolicyKind::proposed: return "proposed";
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::fixed: {
      std::ostringstream os;
      os << "fixed:" << p.fixed_power_w;
      return os.str();
    }
  }
  return "?";
}

// "proposed", "uniform" or "fixed:<watts>".
inline Policy parse_policy(const std::string& s) {
  if (s == "proposed") return {PolicyKind::proposed, 0};
  if (s == "uniform") return {PolicyKind::uniform, 0};
  if (s.rfind("fixed:", 0) == 0) {
    Policy p{PolicyKind::fixed, 0};
    p.fixed_power_w = detail::parse_double("policy", s.substr(6));
    if (p.fixed_power_w < 0) throw ConfigError("fixed policy power must be >= 0");
    return p;
  }
  throw ConfigError("unknown policy '" + s + "' (want proposed, uniform or fixed:<watts>)");
}

// Post-warmup metrics for one pair, or pooled over all pairs (pair = -1).
struct PairReport {
  int pair = -1;
  long long slots_counted = 0;
  double mean_power_w = 0;
  double mean_rate_pkts = 0;
  double mean_queue_pkts = 0;
  double mean_age_s = 0;
  double worst_age_s = 0;
  long long age_samples = 0;    // slots with a defined age
  long long age_undefined = 0;  // slots before the first departure
  double age_viol_freq = 0;     // age beyond the deadline (undefined counts)
  double age_viol2_freq = 0;    // age beyond twice the deadline
  double event_freq = 0;        // queue-threshold events
  double q999_queue_pkts = 0;
  double q999_age_s = 0;
  double q9999_queue_pkts = 0;
  double q9999_age_s = 0;
  long long excess_events = 0;
  VirtualQueues virtuals;  // final values; for the pooled row, max across pairs
  std::optional<FitReport> fit;
};

struct RunSummary {
  SimParams params;
  DerivedParams derived{};
  Policy policy;
  long long counted_slots = 0;
  bool failed = false;
  std::string error;
  std::vector<PairReport> pairs;
  PairReport aggregate;
  std::optional<FitReport> pooled_fit;
  std::string fit_note;  // why the pooled fit is missing, when it is
  std::vector<double> pooled_excess;  // reservoir sample of pooled excesses
  std::size_t pooled_excess_seen = 0;
  BoundTally bound;
  std::vector<CcdfRow> ccdf_queue_agg;
  std::vector<CcdfRow> ccdf_age_agg;
  std::vector<std::vector<CcdfRow>> ccdf_queue_pair;
  std::vector<std::vector<CcdfRow>> ccdf_age_pair;
};

class Simulation;

struct RunOptions {
  bool trace = false;
  std::string out_dir;  // empty: no files written
  std::function<void(const Simulation&)> observer;  // called at each slot end
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

struct PairAccum {
  Welford power, rate, queue, age;
  double worst_age = 0;
  long long age_undefined = 0;
  long long age_viol = 0, age_viol2 = 0, events = 0, counted = 0;
  LogHistogram queue_hist{1e-3, 1e6};
  LogHistogram age_hist{1e-4, 1e4};
  TopValues queue_top, age_top;
  long long excess_events = 0;

  explicit PairAccum(std::size_t top_cap) : queue_top(top_cap), age_top(top_cap) {}
};

inline PairReport report_from(const PairAccum& a, int pair) {
  PairReport r;
  r.pair = pair;
  r.slots_counted = a.counted;
  r.mean_power_w = a.power.mean;
  r.mean_rate_pkts = a.rate.mean;
  r.mean_queue_pkts = a.queue.mean;
  r.mean_age_s = a.age.mean;
  r.worst_age_s = a.worst_age;
  r.age_samples = a.age.n;
  r.age_undefined = a.age_undefined;
  const double n = a.counted > 0 ? static_cast<double>(a.counted) : 1.0;
  r.age_viol_freq = static_cast<double>(a.age_viol) / n;
  r.age_viol2_freq = static_cast<double>(a.age_viol2) / n;
  r.event_freq = static_cast<double>(a.events) / n;
  r.excess_events = a.excess_events;
  const std::size_t nq = a.queue_hist.count();
  if (nq > 0) {
    auto safe_top = [&](const TopValues& top, const LogHistogram& h, double q) {
      const double rank = (1.0 - q) * static_cast<double>(nq);
      return rank <= static_cast<double>(top.size()) ? top.quantile(q, nq) : h.quantile(q);
    };
    r.q999_queue_pkts = safe_top(a.queue_top, a.queue_hist, 0.999);
    r.q9999_queue_pkts = safe_top(a.queue_top, a.queue_hist, 0.9999);
  }
  const std::size_t na = a.age_hist.count();
  if (na > 0) {
    auto safe_top = [&](const TopValues& top, const LogHistogram& h, double q) {
      const double rank = (1.0 - q) * static_cast<double>(na);
      return rank <= static_cast<double>(top.size()) ? top.quantile(q, na) : h.quantile(q);
    };
    r.q999_age_s = safe_top(a.age_top, a.age_hist, 0.999);
    r.q9999_age_s = safe_top(a.age_top, a.age_hist, 0.9999);
  }
  return r;
}

}  // namespace detail

// One scenario run: mobility, grouping, per-slot power control and the queue,
// age and constraint bookkeeping, with everything needed for the summary
// accumulated on the fly.
class Simulation {
 public:
  Simulation(SimParams params, Policy policy)
      : p_(std::move(params)),
        policy_(policy),
        derived_(derive(p_)),
        grid_(p_.area_side_m, p_.street_spacing_m),
        placement_rng_(p_.seed, Stream::placement),
        mobility_rng_(p_.seed, Stream::mobility),
        fading_rng_(p_.seed, Stream::fading),
        clustering_rng_(p_.seed, Stream::clustering),
        reservoir_rng_(p_.seed, Stream::reservoir),
        mobility_(grid_, p_.pair_count, p_.pair_gap_m, p_.speed_mps, p_.slot_s, placement_rng_),
        gains_(p_.pair_count) {}

  const SimParams& params() const { return p_; }
  const DerivedParams& derived() const { return derived_; }
  long long current_slot() const { return slot_; }
  const MobilityModel& mobility() const { return mobility_; }
  const GroupAssignment& assignment() const { return assignment_; }
  const RbMap& rb_map() const { return rb_map_; }
  double queue(int k) const { return queues_[k].queue(); }
  const VirtualQueues& virtuals(int k) const { return virtuals_[k]; }
  double last_rate(int k) const { return prev_rate_[k]; }
  double last_power(int k) const { return last_power_[k]; }

  RunSummary run(const RunOptions& opt = {}) {
    const int K = p_.pair_count;
    const long long warmup = static_cast<long long>(std::floor(p_.warmup_frac *
                                                               static_cast<double>(p_.slots)));
    const long long expected = std::max<long long>(p_.slots - warmup, 1);
    const std::size_t pair_top = static_cast<std::size_t>(
        std::max<long long>(512, expected / 500 + 16));
    const std::size_t agg_top = static_cast<std::size_t>(
        std::max<long long>(4096, expected * K / 5000 + 16));

    queues_.assign(K, TransmitterQueue(derived_.arrivals_per_slot, p_.slot_s));
    virtuals_.assign(K, VirtualQueues{});
    prev_rate_.assign(K, 0.0);
    last_power_.assign(K, 0.0);
    iest_ = InterferenceEstimator(K, p_.rb_count, p_.interference_ema_alpha,
                                  p_.fixed_interference_w);
    power_on_rb_.assign(static_cast<std::size_t>(K) * p_.rb_count, 0.0);
    user_index_.assign(static_cast<std::size_t>(K) * p_.rb_count, -1);

    std::vector<detail::PairAccum> acc;
    acc.reserve(K);
    for (int k = 0; k < K; ++k) acc.emplace_back(pair_top);
    detail::PairAccum agg(agg_top);
    Reservoir pooled(1 << 20, reservoir_rng_);
    std::vector<std::vector<double>> pair_excess(K);
    BoundTally bound;

    std::ofstream trace, positions;
    if (opt.trace) {
      if (opt.out_dir.empty()) throw ConfigError("trace output needs an output directory");
      std::filesystem::create_directories(opt.out_dir);
      trace = detail::open_out(std::filesystem::path(opt.out_dir) / "trace.csv");
      trace << "slot,pair,power_w,rate_pkts,queue_pkts,age_s,event,excess,weight,"
               "multiplier,j_excess_mean,j_excess_sq,j_rate_deficit,j_violation\n";
      positions = detail::open_out(std::filesystem::path(opt.out_dir) / "positions.csv");
      positions << "slot,pair,tx_x,tx_y,rx_x,rx_y\n";
    }

    RunSummary out;
    out.params = p_;
    out.derived = derived_;
    out.policy = policy_;

    std::vector<double> own_gain, iest_w, itrue_w;
    std::vector<PowerDecision> decisions(K);
    std::vector<double> weights(K, 0.0);
    SlotGains slot_gains;

    try {
      for (slot_ = 0; slot_ < p_.slots; ++slot_) {
        if (slot_ % p_.recluster_period == 0) recluster();
        mobility_.step(mobility_rng_);
        gains_.compute(slot_gains, mobility_, rb_users_, p_, fading_rng_);

        // Power decisions from information available before transmission:
        // own gains of the slot and the interference estimate.
        std::fill(power_on_rb_.begin(), power_on_rb_.end(), 0.0);
        for (int k = 0; k < K; ++k) {
          const auto& blocks = rb_map_.blocks_of_pair[k];
          const std::size_t m = blocks.size();
          own_gain.resize(m);
          iest_w.resize(m);
          for (std::size_t i = 0; i < m; ++i) {
            const int n = blocks[i];
            own_gain[i] = slot_gains.gain(n, user_slot(n, k), user_slot(n, k));
            iest_w[i] = iest_.get(k, n);
          }
          switch (policy_.kind) {
            case PolicyKind::proposed: {
              double known_rate = prev_rate_[k];
              if (p_.indicator_rate == IndicatorRate::full_power) {
                const auto tentative = uniform_full_power(m, p_.max_power_w);
                known_rate = rate_packets(tentative.power_w, own_gain, iest_w, p_);
              }
              weights[k] = drift_weight(virtuals_[k], queues_[k].queue(), known_rate,
                                        derived_.arrivals_per_slot, p_.tolerance_of(k),
                                        derived_.margin_pkts, p_.slot_s,
                                        p_.rb_bandwidth_hz, p_.packet_bits);
              decisions[k] = waterfill(weights[k], own_gain, iest_w, p_.power_weight,
                                       p_.max_power_w,
                                       p_.noise_psd_w_hz * p_.rb_bandwidth_hz);
              break;
            }
            case PolicyKind::uniform:
              decisions[k] = uniform_full_power(m, p_.max_power_w);
              break;
            case PolicyKind::fixed:
              decisions[k] = fixed_power(m, policy_.fixed_power_w, p_.max_power_w);
              break;
          }
          for (std::size_t i = 0; i < m; ++i)
            power_on_rb_[static_cast<std::size_t>(k) * p_.rb_count + blocks[i]] =
                decisions[k].power_w[i];
          last_power_[k] = decisions[k].total();
        }

        // Realized rates under the actual interference, then state updates.
        const double instant = static_cast<double>(slot_ + 1) * p_.slot_s;
        const bool count = slot_ >= warmup;
        for (int k = 0; k < K; ++k) {
          const auto& blocks = rb_map_.blocks_of_pair[k];
          const std::size_t m = blocks.size();
          own_gain.resize(m);
          itrue_w.resize(m);
          for (std::size_t i = 0; i < m; ++i) {
            const int n = blocks[i];
            const int me = user_slot(n, k);
            own_gain[i] = slot_gains.gain(n, me, me);
            double inter = 0;
            const auto& users = slot_gains.users(n);
            for (std::size_t u = 0; u < users.size(); ++u) {
              if (static_cast<int>(u) == me) continue;
              inter += power_on_rb_[static_cast<std::size_t>(users[u]) * p_.rb_count + n] *
                       slot_gains.gain(n, static_cast<int>(u), me);
            }
            itrue_w[i] = inter;
            iest_.observe(k, n, inter);
          }
          const double rate = rate_packets(decisions[k].power_w, own_gain, itrue_w, p_);

          const double q_now = queues_[k].queue();
          const ExcessEvent ev = excess_event(q_now, rate, derived_.margin_pkts);
          queues_[k].advance(rate);
          const std::optional<double> age = queues_[k].ledger().age_at(instant);
          virtuals_[k] = update_virtual(virtuals_[k], ev, rate, derived_.arrivals_per_slot,
                                        p_.tolerance_of(k), derived_.excess_mean_cap,
                                        derived_.excess_moment2_cap);
          prev_rate_[k] = rate;

          if (count) {
            auto& a = acc[k];
            a.counted += 1;
            a.power.add(last_power_[k]);
            a.rate.add(rate);
            a.queue.add(q_now);
            a.queue_hist.add(q_now);
            a.queue_top.add(q_now);
            agg.counted += 1;
            agg.power.add(last_power_[k]);
            agg.rate.add(rate);
            agg.queue.add(q_now);
            agg.queue_hist.add(q_now);
            agg.queue_top.add(q_now);
            bool violated = true;
            if (age) {
              a.age.add(*age);
              a.age_hist.add(*age);
              a.age_top.add(*age);
              a.worst_age = std::max(a.worst_age, *age);
              agg.age.add(*age);
              agg.age_hist.add(*age);
              agg.age_top.add(*age);
              agg.worst_age = std::max(agg.worst_age, *age);
              violated = *age > p_.age_limit_s;
              if (*age > 2.0 * p_.age_limit_s) {
                a.age_viol2 += 1;
                agg.age_viol2 += 1;
              }
            } else {
              a.age_undefined += 1;
              agg.age_undefined += 1;
              a.age_viol2 += 1;
              agg.age_viol2 += 1;
            }
            if (violated) {
              a.age_viol += 1;
              agg.age_viol += 1;
            }
            if (ev.triggered) {
              a.events += 1;
              agg.events += 1;
              a.excess_events += 1;
              agg.excess_events += 1;
              pooled.add(ev.excess);
              if (pair_excess[k].size() < kPairExcessCap) pair_excess[k].push_back(ev.excess);
            }
            bound.add(violated, ev.triggered);
          }

          if (opt.trace) {
            trace << slot_ << ',' << k << ',' << last_power_[k] << ',' << rate << ','
                  << q_now << ',';
            if (age) trace << *age;
            trace << ',' << (ev.triggered ? 1 : 0) << ',' << ev.excess << ','
                  << weights[k] << ',' << decisions[k].multiplier << ','
                  << virtuals_[k].excess_mean << ',' << virtuals_[k].excess_sq << ','
                  << virtuals_[k].rate_deficit << ',' << virtuals_[k].violation << '\n';
            const Vec2 t = mobility_.tx(k);
            const Vec2 r = mobility_.rx(k);
            positions << slot_ << ',' << k << ',' << t.x << ',' << t.y << ','
                      << r.x << ',' << r.y << '\n';
          }
        }
        if (opt.observer) opt.observer(*this);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }

    out.counted_slots = agg.counted / std::max(K, 1);
    out.bound = bound;
    for (int k = 0; k < K; ++k) {
      PairReport r = detail::report_from(acc[k], k);
      r.virtuals = virtuals_[k];
      if (pair_excess[k].size() >= static_cast<std::size_t>(p_.fit_sample_floor)) {
        try {
          r.fit = fit_moments(pair_excess[k], p_.fit_sample_floor);
        } catch (const FitError&) {
        }
      }
      out.pairs.push_back(std::move(r));
      out.ccdf_queue_pair.push_back(ccdf_table(acc[k].queue_hist, acc[k].queue_top,
                                               acc[k].queue_hist.count()));
      out.ccdf_age_pair.push_back(ccdf_table(acc[k].age_hist, acc[k].age_top,
                                             acc[k].age_hist.count()));
    }
    out.aggregate = detail::report_from(agg, -1);
    for (int k = 0; k < K; ++k) {
      out.aggregate.virtuals.excess_mean =
          std::max(out.aggregate.virtuals.excess_mean, virtuals_[k].excess_mean);
      out.aggregate.virtuals.excess_sq =
          std::max(out.aggregate.virtuals.excess_sq, virtuals_[k].excess_sq);
      out.aggregate.virtuals.rate_deficit =
          std::max(out.aggregate.virtuals.rate_deficit, virtuals_[k].rate_deficit);
      out.aggregate.virtuals.violation =
          std::max(out.aggregate.virtuals.violation, virtuals_[k].violation);
    }
    out.ccdf_queue_agg = ccdf_table(agg.queue_hist, agg.queue_top, agg.queue_hist.count());
    out.ccdf_age_agg = ccdf_table(agg.age_hist, agg.age_top, agg.age_hist.count());
    out.pooled_excess = pooled.values();
    std::sort(out.pooled_excess.begin(), out.pooled_excess.end());
    out.pooled_excess_seen = pooled.seen();
    if (out.pooled_excess.size() >= static_cast<std::size_t>(p_.fit_sample_floor)) {
      try {
        out.pooled_fit = fit_moments(out.pooled_excess, p_.fit_sample_floor);
      } catch (const FitError& e) {
        out.fit_note = e.what();
      }
    } else {
      out.fit_note = "too few pooled excess samples (" +
                     std::to_string(out.pooled_excess.size()) + ")";
    }

    if (!opt.out_dir.empty()) write_outputs(out, opt.out_dir);
    if (out.failed) throw std::runtime_error("run failed at slot " +
                                             std::to_string(slot_) + ": " + out.error);
    return out;
  }

  static void write_outputs(const RunSummary& s, const std::string& dir);
  static void write_summary_csv(std::ostream& os, const RunSummary& s);
  static void write_ccdf_csv(std::ostream& os, const RunSummary& s, bool age);
  static void write_fit_csv(std::ostream& os, const RunSummary& s);
  static void write_excess_csv(std::ostream& os, const RunSummary& s);

 private:
  static constexpr std::size_t kPairExcessCap = 1 << 16;

  int user_slot(int n, int k) const {
    return user_index_[static_cast<std::size_t>(k) * p_.rb_count + n];
  }

  // Group pairs by midpoint geometry and hand each group the whole band,
  // split round-robin inside the group. Runs on the positions current at the
  // slot boundary.
  void recluster() {
    const int K = p_.pair_count;
    const int groups = std::min(p_.group_count, K);
    std::vector<Vec2> mid(K);
    for (int k = 0; k < K; ++k) mid[k] = mobility_.midpoint(k);
    const Matrix sim = similarity_matrix(mid, p_.kernel_scale_m, p_.kernel_cutoff_m);
    const Matrix rows = spectral_embedding(sim, groups);
    assignment_ = kmeans_rows(rows, groups, clustering_rng_);
    rb_map_ = allocate_rbs(assignment_, p_.rb_count);

    rb_users_.assign(p_.rb_count, {});
    for (int k = 0; k < K; ++k)
      for (int n : rb_map_.blocks_of_pair[k]) rb_users_[n].push_back(k);
    std::fill(user_index_.begin(), user_index_.end(), -1);
    for (int n = 0; n < p_.rb_count; ++n)
      for (std::size_t i = 0; i < rb_users_[n].size(); ++i)
        user_index_[static_cast<std::size_t>(rb_users_[n][i]) * p_.rb_count + n] =
            static_cast<int>(i);
  }

  SimParams p_;
  Policy policy_;
  DerivedParams derived_;
  RoadGrid grid_;
  Rng placement_rng_, mobility_rng_, fading_rng_, clustering_rng_, reservoir_rng_;
  MobilityModel mobility_;
  GainComputer gains_;
  GroupAssignment assignment_;
  RbMap rb_map_;
  std::vector<std::vector<int>> rb_users_;
  std::vector<int> user_index_;
  std::vector<TransmitterQueue> queues_;
  std::vector<VirtualQueues> virtuals_;
  std::vector<double> prev_rate_;
  std::vector<double> last_power_;
  InterferenceEstimator iest_{1, 1, 1.0};
  std::vector<double> power_on_rb_;
  long long slot_ = 0;
};

inline RunSummary run_simulation(const SimParams& params, Policy policy,
                                 const RunOptions& opt = {}) {
  Simulation sim(params, policy);
  return sim.run(opt);
}

// ---- CSV output ----

namespace detail {

inline std::ostream& csv_num(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return os << buf;
}

}  // namespace detail

inline void Simulation::write_summary_csv(std::ostream& os, const RunSummary& s) {
  os << "pair,slots,mean_power_w,mean_rate_pkts,mean_queue_pkts,mean_age_s,worst_age_s,"
        "age_samples,age_undefined,age_viol_freq,age_viol2_freq,event_freq,"
        "q999_queue_pkts,q9999_queue_pkts,q999_age_s,q9999_age_s,excess_events,"
        "j_excess_mean,j_excess_sq,j_rate_deficit,j_violation,status\n";
  auto row = [&](const PairReport& r) {
    if (r.pair < 0) os << "all";
    else os << r.pair;
    os << ',' << r.slots_counted << ',';
    detail::csv_num(os, r.mean_power_w) << ',';
    detail::csv_num(os, r.mean_rate_pkts) << ',';
    detail::csv_num(os, r.mean_queue_pkts) << ',';
    detail::csv_num(os, r.mean_age_s) << ',';
    detail::csv_num(os, r.worst_age_s) << ',';
    os << r.age_samples << ',' << r.age_undefined << ',';
    detail::csv_num(os, r.age_viol_freq) << ',';
    detail::csv_num(os, r.age_viol2_freq) << ',';
    detail::csv_num(os, r.event_freq) << ',';
    detail::csv_num(os, r.q999_queue_pkts) << ',';
    detail::csv_num(os, r.q9999_queue_pkts) << ',';
    detail::csv_num(os, r.q999_age_s) << ',';
    detail::csv_num(os, r.q9999_age_s) << ',';
    os << r.excess_events << ',';
    detail::csv_num(os, r.virtuals.excess_mean) << ',';
    detail::csv_num(os, r.virtuals.excess_sq) << ',';
    detail::csv_num(os, r.virtuals.rate_deficit) << ',';
    detail::csv_num(os, r.virtuals.violation) << ',';
    os << (s.failed ? "failed" : "ok") << '\n';
  };
  for (const auto& r : s.pairs) row(r);
  row(s.aggregate);
}

inline void Simulation::write_ccdf_csv(std::ostream& os, const RunSummary& s, bool age) {
  os << "pair,value,prob\n";
  const auto& per_pair = age ? s.ccdf_age_pair : s.ccdf_queue_pair;
  const auto& agg = age ? s.ccdf_age_agg : s.ccdf_queue_agg;
  for (std::size_t k = 0; k < per_pair.size(); ++k)
    for (const auto& r : per_pair[k]) {
      os << k << ',';
      detail::csv_num(os, r.value) << ',';
      detail::csv_num(os, r.prob) << '\n';
    }
  for (const auto& r : agg) {
    os << "all,";
    detail::csv_num(os, r.value) << ',';
    detail::csv_num(os, r.prob) << '\n';
  }
}

inline void Simulation::write_fit_csv(std::ostream& os, const RunSummary& s) {
  os << "scope,n,scale,shape,ks,method,mean,variance\n";
  auto row = [&](const std::string& scope, const FitReport& f) {
    const GpdMoments m = gpd_moments(f.params);
    os << scope << ',' << f.n << ',';
    detail::csv_num(os, f.params.scale) << ',';
    detail::csv_num(os, f.params.shape) << ',';
    detail::csv_num(os, f.ks) << ',';
    os << (f.method == FitMethod::moments ? "moments" : "mle") << ',';
    detail::csv_num(os, m.mean) << ',';
    detail::csv_num(os, m.variance) << '\n';
  };
  for (const auto& r : s.pairs)
    if (r.fit) row(std::to_string(r.pair), *r.fit);
  if (s.pooled_fit) row("all", *s.pooled_fit);
}

inline void Simulation::write_excess_csv(std::ostream& os, const RunSummary& s) {
  os << "excess\n";
  for (double v : s.pooled_excess) {
    detail::csv_num(os, v) << '\n';
  }
}

inline void Simulation::write_outputs(const RunSummary& s, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  {
    auto os = detail::open_out(fs::path(dir) / "summary.csv");
    write_summary_csv(os, s);
  }
  {
    auto os = detail::open_out(fs::path(dir) / "ccdf_queue.csv");
    write_ccdf_csv(os, s, false);
  }
  {
    auto os = detail::open_out(fs::path(dir) / "ccdf_aoi.csv");
    write_ccdf_csv(os, s, true);
  }
  {
    auto os = detail::open_out(fs::path(dir) / "gpd_fit.csv");
    write_fit_csv(os, s);
  }
  {
    auto os = detail::open_out(fs::path(dir) / "excess.csv");
    write_excess_csv(os, s);
  }
}

// ---- Sweeps ----

enum class SweepAxis { arrival_rate, pair_gap, pair_count };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "arrival_rate") return SweepAxis::arrival_rate;
  if (s == "pair_gap") return SweepAxis::pair_gap;
  if (s == "K") return SweepAxis::pair_count;
  throw ConfigError("unknown sweep axis '" + s + "' (want arrival_rate, pair_gap or K)");
}

inline std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::arrival_rate: return "arrival_rate";
    case SweepAxis::pair_gap: return "pair_gap";
    case SweepAxis::pair_count: return "K";
  }
  return "?";
}

inline SimParams with_axis(SimParams p, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::arrival_rate: p.arrival_bps = value; break;
    case SweepAxis::pair_gap: p.pair_gap_m = value; break;
    case SweepAxis::pair_count: p.pair_count = static_cast<int>(std::llround(value)); break;
  }
  return p;
}

struct SweepPoint {
  double value = 0;
  bool ok = false;
  std::string error;
  RunSummary summary;
};

// Runs one point per value; a failing point records its error and the rest
// still run. jobs > 1 runs points concurrently in batches.
inline std::vector<SweepPoint> run_sweep(const SimParams& base, SweepAxis axis,
                                         std::span<const double> values, Policy policy,
                                         int jobs = 1, const std::string& out_root = "",
                                         bool trace = false) {
  auto one = [&](double v) {
    SweepPoint pt;
    pt.value = v;
    try {
      RunOptions opt;
      opt.trace = trace;
      if (!out_root.empty()) {
        std::ostringstream dir;
        dir << out_root << '/' << axis_name(axis) << '_' << v;
        opt.out_dir = dir.str();
      }
      pt.summary = run_simulation(with_axis(base, axis, v), policy, opt);
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    return pt;
  };

  std::vector<SweepPoint> points;
  points.reserve(values.size());
  if (jobs <= 1) {
    for (double v : values) points.push_back(one(v));
  } else {
    for (std::size_t i = 0; i < values.size();) {
      std::vector<std::future<SweepPoint>> batch;
      for (int j = 0; j < jobs && i < values.size(); ++j, ++i)
        batch.push_back(std::async(std::launch::async, one, values[i]));
      for (auto& f : batch) points.push_back(f.get());
    }
  }
  return points;
}

inline void write_sweep_csv(std::ostream& os, SweepAxis axis,
                            const std::vector<SweepPoint>& points) {
  os << axis_name(axis)
     << ",status,mean_power_w,mean_queue_pkts,mean_age_s,worst_age_s,age_viol_freq,"
        "q9999_queue_pkts,q9999_age_s,excess_events,error\n";
  for (const auto& pt : points) {
    detail::csv_num(os, pt.value) << ',';
    os << (pt.ok ? "ok" : "failed") << ',';
    const PairReport& a = pt.summary.aggregate;
    detail::csv_num(os, a.mean_power_w) << ',';
    detail::csv_num(os, a.mean_queue_pkts) << ',';
    detail::csv_num(os, a.mean_age_s) << ',';
    detail::csv_num(os, a.worst_age_s) << ',';
    detail::csv_num(os, a.age_viol_freq) << ',';
    detail::csv_num(os, a.q9999_queue_pkts) << ',';
    detail::csv_num(os, a.q9999_age_s) << ',';
    os << a.excess_events << ',';
    std::string err = pt.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    os << err << '\n';
  }
}

// ---- Presets ----

struct PresetRun {
  std::string label;
  SimParams params;
  Policy policy;
};

// Canned experiment bundles. Each returns the runs whose outputs reproduce
// one study: tail fits at several loads, policy comparisons, the effect of
// the pair gap, and the mean against worst-case age trade-off.
inline std::vector<PresetRun> preset_runs(const std::string& name, SimParams base) {
  std::vector<PresetRun> runs;
  auto with_k = [&](int k) {
    SimParams p = base;
    p.pair_count = k;
    return p;
  };
  if (name == "fig2") {
    for (int k : {20, 40, 80})
      runs.push_back({"k" + std::to_string(k), with_k(k), {PolicyKind::proposed, 0}});
  } else if (name == "fig3" || name == "fig4") {
    for (int k : {20, 40, 80}) {
      runs.push_back({"k" + std::to_string(k) + "_proposed", with_k(k), {PolicyKind::proposed, 0}});
      runs.push_back({"k" + std::to_string(k) + "_uniform", with_k(k), {PolicyKind::uniform, 0}});
    }
  } else if (name == "fig5") {
    for (double gap : {10.0, 15.0, 20.0, 25.0}) {
      SimParams p = with_k(80);
      p.pair_gap_m = gap;
      std::ostringstream label;
      label << "gap" << gap;
      runs.push_back({label.str(), p, {PolicyKind::proposed, 0}});
    }
  } else if (name == "fig6") {
    for (int k : {20, 80})
      for (double mbps : {0.1, 0.2, 0.3, 0.4, 0.5, 0.65, 0.8, 1.0}) {
        SimParams p = with_k(k);
        p.arrival_bps = mbps * 1e6;
        std::ostringstream label;
        label << "k" << k << "_lambda" << mbps;
        runs.push_back({label.str(), p, {PolicyKind::proposed, 0}});
      }
  } else {
    throw ConfigError("unknown preset '" + name + "' (want fig2..fig6)");
  }
  return runs;
}

inline void write_preset_csv(std::ostream& os, const std::vector<PresetRun>& runs,
                             const std::vector<SweepPoint>& points) {
  os << "label,policy,status,mean_power_w,mean_queue_pkts,mean_age_s,worst_age_s,"
        "age_viol_freq,q9999_queue_pkts,q9999_age_s,excess_events,error\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& pt = points[i];
    os << runs[i].label << ',' << policy_name(runs[i].policy) << ','
       << (pt.ok ? "ok" : "failed") << ',';
    const PairReport& a = pt.summary.aggregate;
    detail::csv_num(os, a.mean_power_w) << ',';
    detail::csv_num(os, a.mean_queue_pkts) << ',';
    detail::csv_num(os, a.mean_age_s) << ',';
    detail::csv_num(os, a.worst_age_s) << ',';
    detail::csv_num(os, a.age_viol_freq) << ',';
    detail::csv_num(os, a.q9999_queue_pkts) << ',';
    detail::csv_num(os, a.q9999_age_s) << ',';
    os << a.excess_events << ',';
    std::string err = pt.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    os << err << '\n';
  }
}

}  // namespace aoitail
