#pragma once

// run / sweep / validate front-ends writing CSV or a check report.

#include "dpimap/cli/config_io.hpp"
#include "dpimap/cli/csv.hpp"
#include "dpimap/sim/swarm.hpp"
#include "dpimap/validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace dpimap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInputError = 2;

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {
      "latency_mean_ms", "latency_p90_ms",  "hit_rate",       "disturbance_rate",
      "mapping_accuracy", "ad_range_p90_m", "vd_range_p90_m", "fused_range_p90_m"};
  return cols;
}

inline std::vector<std::string> run_columns() {
  std::vector<std::string> cols = {"seed", "protocol", "num_uavs", "v_max"};
  for (const auto& m : metric_columns()) cols.push_back(m);
  return cols;
}

inline std::vector<std::string> sweep_columns() {
  std::vector<std::string> cols = {"row_kind"};
  for (const auto& c : run_columns()) cols.push_back(c);
  for (const auto& m : metric_columns()) cols.push_back(m + "_ci90");
  return cols;
}

inline std::vector<double> metric_values(const sim::MetricsRecord& m) {
  return {m.latency_mean_ms(), m.latency_p90_ms(),    m.hit_rate(),       m.disturbance_rate(),
          m.mapping_accuracy(), m.ad_range_p90(), m.vd_range_p90(), m.fused_range_p90()};
}

inline std::vector<std::string> run_row(const SimConfig& c, const sim::MetricsRecord& m) {
  std::vector<std::string> row = {std::to_string(c.seed), sim::to_string(c.protocol), std::to_string(c.num_uavs),
                                  format_number(c.v_max)};
  for (double v : metric_values(m)) row.push_back(format_number(v));
  return row;
}

inline void cmd_run(const RunSpec& spec, std::ostream& out) {
  const auto metrics = sim::run(spec.config);
  write_row(out, run_columns());
  write_row(out, run_row(spec.config, metrics));
}

// One simulation of a sweep, with its aggregation cell.
struct SweepJob {
  SimConfig config;
  std::size_t cell = 0;
};

// Cells in num_uavs, v_max, protocol order, each holding `repetitions` runs.
// Seeds are base + scenario index * repetitions + repetition, where the
// scenario index ignores protocol, so protocols are compared on identical
// mobility and events.
inline std::vector<SweepJob> expand_sweep(const RunSpec& spec) {
  const SimConfig& base = spec.config;
  const std::vector<int> ns = spec.num_uavs.empty() ? std::vector<int>{base.num_uavs} : spec.num_uavs;
  const std::vector<double> vs = spec.v_max.empty() ? std::vector<double>{base.v_max} : spec.v_max;
  const std::vector<Protocol> ps = spec.protocols.empty() ? std::vector<Protocol>{base.protocol} : spec.protocols;
  const std::size_t total = ns.size() * vs.size() * ps.size() * static_cast<std::size_t>(spec.repetitions);
  if (total > spec.job_cap) {
    throw ConfigError("sweep needs " + std::to_string(total) + " runs, above the job cap of " +
                          std::to_string(spec.job_cap),
                      {"job_cap"});
  }
  std::vector<SweepJob> jobs;
  jobs.reserve(total);
  std::size_t scenario = 0, cell = 0;
  for (int n : ns) {
    for (double v : vs) {
      for (Protocol p : ps) {
        for (int r = 0; r < spec.repetitions; ++r) {
          SweepJob job{base, cell};
          job.config.num_uavs = n;
          job.config.v_max = v;
          job.config.protocol = p;
          job.config.seed = base.seed + scenario * static_cast<std::uint64_t>(spec.repetitions) +
                            static_cast<std::uint64_t>(r);
          if (!base.log_path.empty()) job.config.log_path = base.log_path + "." + std::to_string(jobs.size());
          job.config.validate();
          jobs.push_back(std::move(job));
        }
        ++cell;
      }
      ++scenario;
    }
  }
  return jobs;
}

// Mean and 90% normal-approximation half-width over the finite values.
inline std::pair<double, double> mean_ci90(const std::vector<double>& xs) {
  std::vector<double> v;
  for (double x : xs) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) return {sim::kNaN, sim::kNaN};
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  if (v.size() < 2) return {mean, sim::kNaN};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, 1.6448536269514722 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

inline std::vector<sim::MetricsRecord> run_jobs(const std::vector<SweepJob>& jobs, int max_jobs) {
  std::vector<sim::MetricsRecord> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = sim::run(jobs[i].config);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, max_jobs));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, jobs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline void cmd_sweep(const RunSpec& spec, int max_jobs, std::ostream& out) {
  if (!spec.has_axes() && spec.repetitions == 1) {
    cmd_run(spec, out);
    return;
  }
  const auto jobs = expand_sweep(spec);
  const auto results = run_jobs(jobs, max_jobs);
  const std::size_t metric_count = metric_columns().size();
  write_row(out, sweep_columns());
  for (std::size_t begin = 0; begin < jobs.size();) {
    std::size_t end = begin;
    while (end < jobs.size() && jobs[end].cell == jobs[begin].cell) ++end;
    std::vector<std::vector<double>> columns(metric_count);
    for (std::size_t i = begin; i < end; ++i) {
      auto row = run_row(jobs[i].config, results[i]);
      row.insert(row.begin(), "run");
      row.resize(row.size() + metric_count);
      write_row(out, row);
      const auto values = metric_values(results[i]);
      for (std::size_t k = 0; k < metric_count; ++k) columns[k].push_back(values[k]);
    }
    const SimConfig& c = jobs[begin].config;
    std::vector<std::string> agg = {"aggregate", "", sim::to_string(c.protocol), std::to_string(c.num_uavs),
                                    format_number(c.v_max)};
    std::vector<std::string> halfwidths;
    for (const auto& col : columns) {
      const auto [mean, ci] = mean_ci90(col);
      agg.push_back(format_number(mean));
      halfwidths.push_back(format_number(ci));
    }
    agg.insert(agg.end(), halfwidths.begin(), halfwidths.end());
    write_row(out, agg);
    begin = end;
  }
}

// Runs "matcher", "filter" or "all"; returns the process exit code.
inline int cmd_validate(const std::string& suite, std::ostream& out) {
  std::vector<validation::SuiteReport> reports;
  if (suite == "matcher" || suite == "all") reports.push_back(validation::matcher_suite());
  if (suite == "filter" || suite == "all") reports.push_back(validation::filter_suite());
  if (reports.empty()) throw InvalidInput("unknown suite '" + suite + "' (matcher, filter or all)");
  bool ok = true;
  char buf[256];
  for (const auto& rep : reports) {
    for (const auto& c : rep.checks) {
      std::snprintf(buf, sizeof buf, "%s %s: %s = %.6g, required %s %.6g\n", c.pass ? "PASS" : "FAIL",
                    rep.suite.c_str(), c.name.c_str(), c.metric, c.relation.c_str(), c.threshold);
      out << buf;
    }
    ok = ok && rep.passed();
  }
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace dpimap::cli
