#pragma once

// Severity sweeps, per-seed JSON reports and cross-seed aggregation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcart/cifar.hpp"
#include "gcart/corruptions.hpp"
#include "gcart/trainer.hpp"
#include "json.hpp"

namespace gcart {

struct SeveritySweep {
  std::vector<double> per_severity;  // severities 1..5, percent
  double mean = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty list");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct EvalReport {
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  double clean_acc = 0.0;
  std::map<std::string, SeveritySweep> corruptions;
  nlohmann::json train_log = nlohmann::json::array();

  void validate() const {
    auto check = [](double a) {
      if (!(a >= 0.0 && a <= 100.0)) throw std::invalid_argument("eval report: accuracy outside [0, 100]");
    };
    check(clean_acc);
    for (const auto& [name, sweep] : corruptions) {
      if (sweep.per_severity.size() != 5) throw std::invalid_argument("eval report: need 5 severities for " + name);
      for (double a : sweep.per_severity) check(a);
      if (std::abs(sweep.mean - mean_of(sweep.per_severity)) > 1e-9) {
        throw std::invalid_argument("eval report: stored mean for " + name + " disagrees with severities");
      }
    }
  }
};

inline SeveritySweep sweep(const Model& model, const Dataset& data, Corruption kind) {
  SeveritySweep s;
  for (int sev = 1; sev <= 5; ++sev) s.per_severity.push_back(accuracy(model, data, CorruptionSpec{kind, sev}));
  s.mean = mean_of(s.per_severity);
  return s;
}

inline EvalReport evaluate_all(const Model& model, const Dataset& data, std::uint64_t seed,
                               const nlohmann::json& config) {
  EvalReport r;
  r.seed = seed;
  r.config = config;
  r.clean_acc = accuracy(model, data);
  for (Corruption c : kCorruptions) r.corruptions[std::string(to_string(c))] = sweep(model, data, c);
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json corr = nlohmann::json::object();
  for (const auto& [name, s] : r.corruptions) corr[name] = {{"per_severity", s.per_severity}, {"mean", s.mean}};
  nlohmann::json j{{"version", 1}, {"seed", r.seed}, {"config", r.config}, {"clean_acc", r.clean_acc},
                   {"corruptions", corr}};
  if (!r.train_log.empty()) j["train_log"] = r.train_log;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw std::invalid_argument("eval report: unsupported version");
  EvalReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  r.clean_acc = j.at("clean_acc").get<double>();
  for (const auto& [name, s] : j.at("corruptions").items()) {
    r.corruptions[name] = SeveritySweep{s.at("per_severity").get<std::vector<double>>(), s.at("mean").get<double>()};
  }
  if (j.contains("train_log")) r.train_log = j.at("train_log");
  r.validate();
  return r;
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;
};

// Mean and sample standard deviation (n - 1); zero spread for a single value.
inline Stat mean_sd(const std::vector<double>& v) {
  Stat s;
  s.mean = mean_of(v);
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

struct Summary {
  std::vector<std::uint64_t> seeds;
  nlohmann::json config;
  Stat clean;
  std::map<std::string, Stat> corruption_mean;                // column of the main tables
  std::map<std::string, std::vector<Stat>> corruption_severity;  // per-severity curves
  std::vector<std::string> warnings;
};

// Config echo minus the per-run seed, which is expected to differ.
inline nlohmann::json config_without_seed(nlohmann::json c) {
  if (c.is_object()) c.erase("seed");
  return c;
}

inline Summary aggregate(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: need at least one report");
  Summary s;
  s.config = config_without_seed(reports.front().config);
  for (const auto& r : reports) {
    if (config_without_seed(r.config) != s.config) {
      throw std::invalid_argument("aggregate: reports were produced with different configs");
    }
    if (r.corruptions.size() != reports.front().corruptions.size()) {
      throw std::invalid_argument("aggregate: reports cover different corruptions");
    }
    s.seeds.push_back(r.seed);
  }
  if (reports.size() == 1) s.warnings.push_back("single seed: standard deviation reported as 0");

  std::vector<double> clean;
  for (const auto& r : reports) clean.push_back(r.clean_acc);
  s.clean = mean_sd(clean);
  for (const auto& [name, first] : reports.front().corruptions) {
    std::vector<double> means;
    std::vector<std::vector<double>> sev(first.per_severity.size());
    for (const auto& r : reports) {
      auto it = r.corruptions.find(name);
      if (it == r.corruptions.end()) throw std::invalid_argument("aggregate: report missing corruption " + name);
      means.push_back(it->second.mean);
      for (std::size_t k = 0; k < sev.size(); ++k) sev[k].push_back(it->second.per_severity.at(k));
    }
    s.corruption_mean[name] = mean_sd(means);
    for (const auto& col : sev) s.corruption_severity[name].push_back(mean_sd(col));
  }
  return s;
}

inline nlohmann::json to_json(const Summary& s) {
  auto stat = [](const Stat& x) { return nlohmann::json{{"mean", x.mean}, {"sd", x.sd}}; };
  nlohmann::json corr = nlohmann::json::object();
  for (const auto& [name, st] : s.corruption_mean) {
    nlohmann::json sev = nlohmann::json::array();
    for (const Stat& x : s.corruption_severity.at(name)) sev.push_back(stat(x));
    corr[name] = {{"mean", stat(st)}, {"per_severity", sev}};
  }
  return {{"version", 1},     {"seeds", s.seeds},       {"config", s.config},
          {"clean", stat(s.clean)}, {"corruptions", corr}, {"warnings", s.warnings}};
}

// Header plus one row: clean, then each corruption mean, as "mean +- sd".
inline std::string to_csv(const Summary& s, const std::string& label) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "model,clean";
  for (const auto& [name, st] : s.corruption_mean) os << ',' << name;
  os << '\n' << label << ',' << s.clean.mean << " +- " << s.clean.sd;
  for (const auto& [name, st] : s.corruption_mean) os << ',' << st.mean << " +- " << st.sd;
  os << '\n';
  return os.str();
}

}  // namespace gcart
