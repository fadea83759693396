#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoitail {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// How the queue-event indicator inside the drift weight obtains a rate before
// the slot's powers are chosen: replay the previous slot's realized rate, or
// evaluate a tentative rate at full power on the current gains.
enum class IndicatorRate { previous, full_power };

// Scenario parameters. Everything is stored in SI units with linear power
// gains; dB and dBm appear only at the config-file boundary.
struct SimParams {
  int pair_count = 80;                    // transmitter/receiver pairs sharing the band
  int rb_count = 20;                      // resource blocks
  double rb_bandwidth_hz = 180e3;         // per-block bandwidth
  double slot_s = 3e-3;                   // slot length
  double max_power_w = 0.19952623149688797;       // 23 dBm budget per transmitter
  double packet_bits = 4000.0;            // fixed packet size
  double noise_psd_w_hz = 3.981071705534986e-21;  // -174 dBm/Hz thermal noise
  double arrival_bps = 0.5e6;             // source rate at each transmitter
  double age_limit_s = 60e-3;             // freshness deadline on the age process
  std::vector<double> tolerance{1e-3};    // per-pair age-violation tolerance; size 1 broadcasts
  double gpd_scale_cap = 5.0;             // scale of the excess distribution the caps are derived from
  double gpd_shape_cap = -5.0;            // shape of that distribution (must be < 1/2)
  std::optional<double> margin_override;  // fixed threshold margin instead of the derived one
  double power_weight = 0.0;              // weight on transmit power in the per-slot objective
  int group_count = 10;                   // reuse groups formed by clustering
  double kernel_scale_m = 30.0;           // similarity kernel length scale
  double kernel_cutoff_m = 150.0;         // similarity hard cutoff distance
  int recluster_period = 100;             // slots between clustering updates
  double pl_exponent = 1.61;              // path loss exponent
  double intersection_radius_m = 15.0;    // corner zone for the weak line-of-sight class
  double pl_intercept = 1.4125375446227555e-07;       // -68.5 dB at 1 m, line of sight
  double pl_intercept_nlos = 3.548133892335753e-06;   // -54.5 dB, blocked links
  double speed_mps = 60.0 / 3.6;          // vehicle speed, constant
  double pair_gap_m = 15.0;               // receiver trails its transmitter by this arc length
  double area_side_m = 250.0;             // square region side
  double street_spacing_m = 62.5;         // distance between parallel streets
  long long slots = 200000;               // horizon
  std::uint64_t seed = 1;
  double warmup_frac = 0.1;               // leading fraction excluded from statistics
  std::optional<double> fixed_interference_w;  // constant interference estimate override
  IndicatorRate indicator_rate = IndicatorRate::previous;
  double interference_ema_alpha = 0.01;   // smoothing for the running interference estimate
  int fit_sample_floor = 100;             // minimum excess samples before fitting a tail

  double tolerance_of(int k) const {
    return tolerance.size() == 1 ? tolerance.front() : tolerance.at(static_cast<std::size_t>(k));
  }
};

// Quantities derived from SimParams once per run.
struct DerivedParams {
  double arrivals_per_slot;  // packet arrivals per slot (fractional)
  double margin_pkts;        // offset in the queue-event threshold Q > R - margin
  double excess_mean_cap;    // bound imposed on the mean of threshold excesses
  double excess_moment2_cap; // bound imposed on their second moment
  double arrivals_per_s;     // arrivals_per_slot / slot_s
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("parameter check failed: " + what);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for '" + key + "': " + v);
  }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

}  // namespace detail

inline void validate(const SimParams& p) {
  using detail::require;
  require(p.pair_count >= 1, "K >= 1 (K = " + std::to_string(p.pair_count) + ")");
  require(p.rb_count >= 1, "N >= 1");
  require(p.rb_bandwidth_hz > 0, "omega > 0");
  require(p.slot_s > 0, "tau > 0");
  require(p.max_power_w > 0, "P_max > 0");
  require(p.packet_bits > 0, "Z > 0");
  require(p.noise_psd_w_hz > 0, "N0 > 0");
  require(p.arrival_bps > 0, "lambda > 0");
  require(p.age_limit_s > 0, "d > 0");
  for (double e : p.tolerance) require(e > 0 && e < 1, "0 < epsilon < 1");
  require(p.tolerance.size() == 1 ||
              p.tolerance.size() == static_cast<std::size_t>(p.pair_count),
          "epsilon list has 1 or K entries");
  require(p.gpd_scale_cap > 0, "sigma_th > 0");
  require(p.gpd_shape_cap < 0.5, "xi_th < 1/2");
  require(p.power_weight >= 0, "V >= 0");
  require(p.group_count >= 1, "g >= 1");
  require(p.kernel_scale_m > 0, "gamma > 0");
  require(p.kernel_cutoff_m > 0, "phi > 0");
  require(p.recluster_period >= 1, "T0 >= 1");
  require(p.pl_exponent > 0, "alpha > 0");
  require(p.intersection_radius_m >= 0, "D >= 0");
  require(p.pl_intercept > 0, "l0 > 0");
  require(p.pl_intercept_nlos > 0, "l0_prime > 0");
  require(p.speed_mps > 0, "speed > 0");
  require(p.pair_gap_m > 0, "pair_gap > 0");
  require(p.area_side_m > 0, "area_side > 0");
  require(p.street_spacing_m > 0, "street_spacing > 0");
  const double ratio = p.area_side_m / p.street_spacing_m;
  require(std::abs(ratio - std::round(ratio)) < 1e-9,
          "street_spacing divides area_side");
  require(p.pair_gap_m < p.area_side_m, "pair_gap < area_side");
  require(p.slots >= 1, "slots >= 1");
  require(p.warmup_frac >= 0 && p.warmup_frac < 1, "0 <= warmup < 1");
  require(!p.fixed_interference_w || *p.fixed_interference_w >= 0, "I_const >= 0");
  require(p.interference_ema_alpha > 0 && p.interference_ema_alpha <= 1,
          "0 < ema_alpha <= 1");
  require(p.fit_sample_floor >= 2, "fit_floor >= 2");
}

// Per-run constants. The margin defaults to 2 - (d/tau - 1) * A, which makes
// the queue event Q > R - margin an upper bound for the age process exceeding
// its deadline; callers can pin it via margin_override instead.
inline DerivedParams derive(const SimParams& p) {
  validate(p);
  DerivedParams d{};
  d.arrivals_per_slot = p.arrival_bps * p.slot_s / p.packet_bits;
  d.arrivals_per_s = d.arrivals_per_slot / p.slot_s;
  detail::require(d.arrivals_per_s * p.age_limit_s >= 1.0,
                  "A/tau >= 1/d (arrival rate too low for the age deadline)");
  d.margin_pkts = p.margin_override
                      ? *p.margin_override
                      : 2.0 - (p.age_limit_s / p.slot_s - 1.0) * d.arrivals_per_slot;
  const double xi = p.gpd_shape_cap;
  const double sigma = p.gpd_scale_cap;
  d.excess_mean_cap = sigma / (1.0 - xi);
  d.excess_moment2_cap = 2.0 * sigma * sigma / ((1.0 - xi) * (1.0 - 2.0 * xi));
  return d;
}

// Applies one key=value pair using the config-file vocabulary. Shared by the
// file loader and command-line overrides.
inline void apply_config_entry(SimParams& p, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_list;
  if (key == "K") p.pair_count = static_cast<int>(parse_int(key, value));
  else if (key == "N") p.rb_count = static_cast<int>(parse_int(key, value));
  else if (key == "omega") p.rb_bandwidth_hz = parse_double(key, value);
  else if (key == "tau") p.slot_s = parse_double(key, value);
  else if (key == "P_max") p.max_power_w = dbm_to_watt(parse_double(key, value));
  else if (key == "Z") p.packet_bits = parse_double(key, value);
  else if (key == "N0") p.noise_psd_w_hz = dbm_to_watt(parse_double(key, value));
  else if (key == "lambda") p.arrival_bps = parse_double(key, value);
  else if (key == "d") p.age_limit_s = parse_double(key, value);
  else if (key == "epsilon") p.tolerance = parse_list(key, value);
  else if (key == "sigma_th") p.gpd_scale_cap = parse_double(key, value);
  else if (key == "xi_th") p.gpd_shape_cap = parse_double(key, value);
  else if (key == "psi") p.margin_override = parse_double(key, value);
  else if (key == "V") p.power_weight = parse_double(key, value);
  else if (key == "g") p.group_count = static_cast<int>(parse_int(key, value));
  else if (key == "gamma") p.kernel_scale_m = parse_double(key, value);
  else if (key == "phi") p.kernel_cutoff_m = parse_double(key, value);
  else if (key == "T0") p.recluster_period = static_cast<int>(parse_int(key, value));
  else if (key == "alpha") p.pl_exponent = parse_double(key, value);
  else if (key == "D") p.intersection_radius_m = parse_double(key, value);
  else if (key == "l0") p.pl_intercept = db_to_linear(parse_double(key, value));
  else if (key == "l0_prime") p.pl_intercept_nlos = db_to_linear(parse_double(key, value));
  else if (key == "speed") p.speed_mps = parse_double(key, value);
  else if (key == "pair_gap") p.pair_gap_m = parse_double(key, value);
  else if (key == "area_side") p.area_side_m = parse_double(key, value);
  else if (key == "street_spacing") p.street_spacing_m = parse_double(key, value);
  else if (key == "slots") p.slots = parse_int(key, value);
  else if (key == "seed") p.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "warmup") p.warmup_frac = parse_double(key, value);
  else if (key == "I_const") p.fixed_interference_w = parse_double(key, value);
  else if (key == "ema_alpha") p.interference_ema_alpha = parse_double(key, value);
  else if (key == "fit_floor") p.fit_sample_floor = static_cast<int>(parse_int(key, value));
  else if (key == "indicator_rate") {
    if (value == "previous") p.indicator_rate = IndicatorRate::previous;
    else if (value == "full_power") p.indicator_rate = IndicatorRate::full_power;
    else throw ConfigError("indicator_rate must be 'previous' or 'full_power', got '" + value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// Flat key = value format, '#' starts a comment. Unknown keys are errors so a
// typo cannot silently fall back to a default. Values for P_max, N0, l0 and
// l0_prime are given in dBm / dB as in the usual link-budget tables.
inline SimParams params_from_config(std::istream& in, SimParams base = SimParams{}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_config_entry(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline SimParams load_params(const std::string& path, SimParams base = SimParams{}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return params_from_config(in, base);
}

}  // namespace aoitail
