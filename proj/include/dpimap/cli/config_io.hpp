#pragma once

// Run specification from a key = value file with optional [sim] and [sweep]
// sections, then DPIMAP_<KEY> environment overrides.

#include "dpimap/sim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dpimap::cli {

using sim::ConfigError;
using sim::Protocol;
using sim::SimConfig;

inline constexpr std::size_t kDefaultJobCap = 10'000;

struct RunSpec {
  SimConfig config;
  std::vector<int> num_uavs;      // sweep axis; empty = config value
  std::vector<double> v_max;      // sweep axis; empty = config value
  std::vector<Protocol> protocols;  // sweep axis; empty = config value
  int repetitions = 1;
  std::size_t job_cap = kDefaultJobCap;

  bool has_axes() const { return !num_uavs.empty() || !v_max.empty() || !protocols.empty(); }
};

// Reads an environment variable; injectable for tests.
using EnvLookup = std::function<const char*(const std::string&)>;

inline const char* process_env(const std::string& name) { return std::getenv(name.c_str()); }

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": cannot parse '" + value + "' as " + expected, {key});
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, v, "a number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

template <class E>
E parse_enum(const std::string& key, const std::string& raw, std::initializer_list<std::pair<const char*, E>> names) {
  const std::string v = trim(raw);
  for (const auto& [name, value] : names) {
    if (v == name) return value;
  }
  std::string expected = "one of";
  for (const auto& n : names) expected += std::string(" ") + n.first;
  bad_value(key, v, expected.c_str());
}

inline Protocol parse_protocol_value(const std::string& key, const std::string& raw) {
  const auto p = sim::parse_protocol(trim(raw));
  if (!p) bad_value(key, trim(raw), "broadcast, feedback or dpi");
  return *p;
}

using Setter = std::function<void(SimConfig&, const std::string& key, const std::string& value)>;

template <class T>
Setter number(T SimConfig::*field) {
  return [field](SimConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

inline Setter flag(bool SimConfig::*field) {
  return [field](SimConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); };
}

inline const std::map<std::string, Setter>& sim_keys() {
  using namespace sim;
  static const std::map<std::string, Setter> keys = {
      {"num_uavs", number(&SimConfig::num_uavs)},
      {"region",
       [](SimConfig& c, const std::string& k, const std::string& v) {
         const auto parts = split_list(v);
         if (parts.size() != 3) bad_value(k, v, "three comma-separated numbers");
         for (int i = 0; i < 3; ++i) c.region[i] = parse_number<double>(k, parts[static_cast<std::size_t>(i)]);
       }},
      {"v_min", number(&SimConfig::v_min)},
      {"v_max", number(&SimConfig::v_max)},
      {"beacon_interval", number(&SimConfig::beacon_interval)},
      {"vd_interval", number(&SimConfig::vd_interval)},
      {"comm_range", number(&SimConfig::comm_range)},
      {"sense_range", number(&SimConfig::sense_range)},
      {"rssi_sigma", number(&SimConfig::rssi_sigma)},
      {"gnss_sigma", number(&SimConfig::gnss_sigma)},
      {"ec_rate", number(&SimConfig::ec_rate)},
      {"alpha", number(&SimConfig::alpha)},
      {"epsilon", number(&SimConfig::epsilon)},
      {"tx_airtime", number(&SimConfig::tx_airtime)},
      {"proc_jitter_mean", number(&SimConfig::proc_jitter_mean)},
      {"contention_slot", number(&SimConfig::contention_slot)},
      {"duration", number(&SimConfig::duration)},
      {"warmup", number(&SimConfig::warmup)},
      {"settle_timeout", number(&SimConfig::settle_timeout)},
      {"seed", number(&SimConfig::seed)},
      {"protocol",
       [](SimConfig& c, const std::string& k, const std::string& v) { c.protocol = parse_protocol_value(k, v); }},
      {"sigma_r", number(&SimConfig::sigma_r)},
      {"sigma_theta", number(&SimConfig::sigma_theta)},
      {"sigma_phi", number(&SimConfig::sigma_phi)},
      {"sigma_app", number(&SimConfig::sigma_app)},
      {"kf_q", number(&SimConfig::kf_q)},
      {"assoc_gate", number(&SimConfig::assoc_gate)},
      {"assoc_gamma", number(&SimConfig::assoc_gamma)},
      {"track_max_misses", number(&SimConfig::track_max_misses)},
      {"innovation_gate", number(&SimConfig::innovation_gate)},
      {"bim_exchange", flag(&SimConfig::bim_exchange)},
      {"match_gate", number(&SimConfig::match_gate)},
      {"match_position_gate", number(&SimConfig::match_position_gate)},
      {"min_track_frames", number(&SimConfig::min_track_frames)},
      {"weight_source",
       [](SimConfig& c, const std::string& k, const std::string& v) {
         c.weight_source = parse_enum<WeightSource>(k, v, {{"visual", WeightSource::kVisual},
                                                          {"auditory", WeightSource::kAuditory}});
       }},
      {"complement_distinguishability", flag(&SimConfig::complement_distinguishability)},
      {"magnitude_aware", flag(&SimConfig::magnitude_aware)},
      {"ad_update",
       [](SimConfig& c, const std::string& k, const std::string& v) {
         c.ad_update = parse_enum<AdUpdate>(k, v, {{"position", AdUpdate::kPosition},
                                                  {"kinematic", AdUpdate::kKinematic}});
       }},
      {"velocity_frame",
       [](SimConfig& c, const std::string& k, const std::string& v) {
         c.velocity_frame = parse_enum<VelocityFrame>(k, v, {{"relative", VelocityFrame::kRelative},
                                                            {"ground", VelocityFrame::kGround}});
       }},
      {"mobility",
       [](SimConfig& c, const std::string& k, const std::string& v) {
         c.mobility = parse_enum<Mobility>(k, v, {{"random_waypoint", Mobility::kRandomWaypoint},
                                                 {"anchored", Mobility::kAnchored}});
       }},
      {"anchor_spacing", number(&SimConfig::anchor_spacing)},
      {"anchor_halfwidth", number(&SimConfig::anchor_halfwidth)},
      {"log_path", [](SimConfig& c, const std::string&, const std::string& v) { c.log_path = trim(v); }},
  };
  return keys;
}

using SweepSetter = std::function<void(RunSpec&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, SweepSetter>& sweep_keys() {
  static const std::map<std::string, SweepSetter> keys = {
      {"num_uavs",
       [](RunSpec& s, const std::string& k, const std::string& v) {
         s.num_uavs.clear();
         for (const auto& x : split_list(v)) s.num_uavs.push_back(parse_number<int>(k, x));
       }},
      {"v_max",
       [](RunSpec& s, const std::string& k, const std::string& v) {
         s.v_max.clear();
         for (const auto& x : split_list(v)) s.v_max.push_back(parse_number<double>(k, x));
       }},
      {"protocol",
       [](RunSpec& s, const std::string& k, const std::string& v) {
         s.protocols.clear();
         for (const auto& x : split_list(v)) s.protocols.push_back(parse_protocol_value(k, x));
       }},
      {"repetitions",
       [](RunSpec& s, const std::string& k, const std::string& v) { s.repetitions = parse_number<int>(k, v); }},
      {"job_cap",
       [](RunSpec& s, const std::string& k, const std::string& v) {
         s.job_cap = parse_number<std::size_t>(k, v);
       }},
  };
  return keys;
}

inline std::string env_name(const std::string& prefix, const std::string& key) {
  std::string out = prefix + key;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace detail

// Parses the configuration text. `num_uavs` must be given in the file or
// through DPIMAP_NUM_UAVS. Sweep keys are overridden by DPIMAP_SWEEP_<KEY>.
inline RunSpec parse_run_spec(std::istream& in, const EnvLookup& env = process_env) {
  // ini_parser only knows ';' comments
  std::stringstream text;
  for (std::string line; std::getline(in, line);) {
    const std::string t = detail::trim(line);
    if (!t.empty() && t[0] == '#') continue;
    text << line << '\n';
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(text, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message(), {});
  }

  RunSpec spec;
  std::vector<std::string> unknown;
  bool have_num_uavs = false;
  const auto& sim_keys = detail::sim_keys();
  const auto& sweep_keys = detail::sweep_keys();
  auto apply_sim = [&](const std::string& key, const std::string& value) {
    const auto it = sim_keys.find(key);
    if (it == sim_keys.end()) {
      unknown.push_back(key);
      return;
    }
    it->second(spec.config, key, value);
    have_num_uavs = have_num_uavs || key == "num_uavs";
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply_sim(name, node.data());
    } else if (name == "sim") {
      for (const auto& [key, leaf] : node) apply_sim(key, leaf.data());
    } else if (name == "sweep") {
      for (const auto& [key, leaf] : node) {
        const auto it = sweep_keys.find(key);
        if (it == sweep_keys.end()) {
          unknown.push_back("sweep." + key);
        } else {
          it->second(spec, key, leaf.data());
        }
      }
    } else {
      unknown.push_back("[" + name + "]");
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown configuration key:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg, unknown);
  }

  for (const auto& [key, setter] : sim_keys) {
    if (const char* v = env(detail::env_name("DPIMAP_", key))) {
      setter(spec.config, key, v);
      have_num_uavs = have_num_uavs || key == "num_uavs";
    }
  }
  for (const auto& [key, setter] : sweep_keys) {
    if (const char* v = env(detail::env_name("DPIMAP_SWEEP_", key))) setter(spec, key, v);
  }

  if (!have_num_uavs) throw ConfigError("missing required key: num_uavs", {"num_uavs"});
  if (spec.repetitions < 1) throw ConfigError("repetitions must be >= 1", {"repetitions"});
  spec.config.validate();
  return spec;
}

inline RunSpec load_run_spec(const std::string& path, const EnvLookup& env = process_env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, {});
  return parse_run_spec(in, env);
}

}  // namespace dpimap::cli
