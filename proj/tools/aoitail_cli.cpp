// Command-line front end: single runs, parameter sweeps and tail fits on an
// existing excess dump. All outputs are CSV files under --out.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aoitail/gpd.hpp"
#include "aoitail/harness.hpp"
#include "aoitail/params.hpp"

namespace {

// One parseable line on stderr so callers can react without scraping prose.
void emit_error(const std::string& code, const std::string& msg) {
  std::string clean = msg;
  for (char& c : clean)
    if (c == '"' || c == '\n') c = '\'';
  std::cerr << "error code=" << code << " msg=\"" << clean << "\"\n";
}

int classify_exit(const std::exception& e, const std::string& what) {
  if (dynamic_cast<const aoitail::ConfigError*>(&e)) {
    emit_error("config", what);
    return 1;
  }
  if (dynamic_cast<const aoitail::IoError*>(&e)) {
    emit_error("io", what);
    return 3;
  }
  emit_error("runtime", what);
  return 2;
}

std::vector<double> load_excess_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw aoitail::IoError("cannot open excess dump: " + path);
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = aoitail::detail::trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == "excess") continue;  // header optional
    }
    out.push_back(aoitail::detail::parse_double("excess", line));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slotted network simulator with tail-aware power control"};
  app.require_subcommand(1);

  std::string config_path, out_dir, policy_str = "proposed", preset;
  std::optional<std::uint64_t> seed;
  std::optional<long long> slots;
  bool trace = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "parameter file (key = value lines)");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--slots", slots, "horizon override");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one scenario (or a preset bundle)");
  add_common(run);
  run->add_option("--policy", policy_str, "proposed | uniform | fixed:<watts>");
  run->add_option("--preset", preset, "fig2..fig6: canned multi-run bundles");
  run->add_flag("--trace", trace, "write per-slot trace.csv and positions.csv");

  CLI::App* sweep = app.add_subcommand("sweep", "re-run a scenario along one axis");
  add_common(sweep);
  sweep->add_option("--policy", policy_str, "proposed | uniform | fixed:<watts>");
  std::string axis_str = "arrival_rate";
  std::vector<double> values;
  int jobs = 1;
  sweep->add_option("--axis", axis_str, "arrival_rate | pair_gap | K");
  sweep->add_option("--values", values, "axis values (comma separated)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--jobs", jobs, "concurrent runs");

  CLI::App* fit = app.add_subcommand("fit", "fit a tail model to an excess dump");
  std::string fit_in, fit_method = "moments";
  int fit_floor = 100;
  fit->add_option("--in", fit_in, "excess.csv from a run")->required();
  fit->add_option("--out", out_dir, "output directory");
  fit->add_option("--method", fit_method, "moments | mle");
  fit->add_option("--floor", fit_floor, "minimum sample count");

  CLI11_PARSE(app, argc, argv);

  try {
    aoitail::SimParams params;
    if (!config_path.empty()) params = aoitail::load_params(config_path);
    if (seed) params.seed = *seed;
    if (slots) params.slots = *slots;

    if (run->parsed()) {
      const aoitail::Policy policy = aoitail::parse_policy(policy_str);
      if (!preset.empty()) {
        if (out_dir.empty()) throw aoitail::ConfigError("--preset needs --out");
        const auto runs = aoitail::preset_runs(preset, params);
        std::vector<aoitail::SweepPoint> points;
        for (const auto& r : runs) {
          aoitail::SweepPoint pt;
          try {
            aoitail::RunOptions opt;
            opt.trace = trace;
            opt.out_dir = out_dir + "/" + r.label;
            pt.summary = aoitail::run_simulation(r.params, r.policy, opt);
            pt.ok = true;
          } catch (const std::exception& e) {
            pt.error = e.what();
          }
          std::cout << r.label << ": " << (pt.ok ? "ok" : "failed: " + pt.error) << '\n';
          points.push_back(std::move(pt));
        }
        auto os = aoitail::detail::open_out(std::filesystem::path(out_dir) / "preset_summary.csv");
        aoitail::write_preset_csv(os, runs, points);
        for (const auto& pt : points)
          if (!pt.ok) {
            emit_error("runtime", "preset run failed: " + pt.error);
            return 2;
          }
        return 0;
      }
      aoitail::RunOptions opt;
      opt.trace = trace;
      opt.out_dir = out_dir;
      const aoitail::RunSummary s = aoitail::run_simulation(params, policy, opt);
      std::cout << "slots counted " << s.counted_slots
                << ", mean power " << s.aggregate.mean_power_w << " W"
                << ", mean age " << s.aggregate.mean_age_s << " s"
                << ", age violation freq " << s.aggregate.age_viol_freq << '\n';
      return 0;
    }

    if (sweep->parsed()) {
      if (values.empty()) throw aoitail::ConfigError("sweep needs at least one value");
      const aoitail::Policy policy = aoitail::parse_policy(policy_str);
      const aoitail::SweepAxis axis = aoitail::parse_axis(axis_str);
      const auto points = aoitail::run_sweep(params, axis, values, policy, jobs, out_dir, trace);
      if (!out_dir.empty()) {
        auto os = aoitail::detail::open_out(std::filesystem::path(out_dir) / "sweep.csv");
        aoitail::write_sweep_csv(os, axis, points);
      } else {
        aoitail::write_sweep_csv(std::cout, axis, points);
      }
      for (const auto& pt : points)
        if (!pt.ok) {
          emit_error("runtime", "sweep point " + std::to_string(pt.value) +
                                    " failed: " + pt.error);
          return 2;
        }
      return 0;
    }

    // fit
    const auto samples = load_excess_column(fit_in);
    aoitail::FitReport report;
    if (fit_method == "moments") {
      report = aoitail::fit_moments(samples, static_cast<std::size_t>(fit_floor));
    } else if (fit_method == "mle") {
      report = aoitail::fit_mle(samples, static_cast<std::size_t>(fit_floor));
    } else {
      throw aoitail::ConfigError("unknown fit method '" + fit_method + "'");
    }
    const aoitail::GpdMoments m = aoitail::gpd_moments(report.params);
    std::cout << "n " << report.n << ", scale " << report.params.scale << ", shape "
              << report.params.shape << ", ks " << report.ks << ", mean " << m.mean
              << ", variance " << m.variance << '\n';
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      auto os = aoitail::detail::open_out(std::filesystem::path(out_dir) / "gpd_fit.csv");
      os << "scope,n,scale,shape,ks,method,mean,variance\nfile," << report.n << ','
         << report.params.scale << ',' << report.params.shape << ',' << report.ks << ','
         << fit_method << ',' << m.mean << ',' << m.variance << '\n';
    }
    return 0;
  } catch (const aoitail::FitError& e) {
    emit_error("fit", e.what());
    return 2;
  } catch (const std::exception& e) {
    return classify_exit(e, e.what());
  }
}
