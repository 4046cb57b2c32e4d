#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrbench/recon.hpp"
#include "mrbench/sampling.hpp"
#include "mrbench/suite.hpp"

namespace mrb {

struct StudyConfig {
  std::size_t n_cases = 5;
  std::size_t n_readers = 7;
  std::size_t finalists = 4;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  // "system" or an RFC-3339 start time for a stepped logical clock.
  std::string clock = "system";
  std::int64_t clock_step_seconds = 86400;
  std::map<std::string, std::string> teams;   // token -> team id
  std::map<std::string, std::string> readers; // token -> reader id
};

// Every tunable of a run. Loaded from a TOML file; unknown keys are errors.
struct RunConfig {
  std::uint64_t seed = 2019;
  unsigned jobs = 1;
  SuiteConfig dataset;
  std::vector<double> split_fractions; // empty -> full-scale proportions
  double center_fraction_r4 = 0.08;
  double center_fraction_r8 = 0.04;
  std::map<ReconMethod, ReconConfig> recon;
  StudyConfig study;
  ServeConfig serve;

  static RunConfig parse(const std::string &toml_text, const std::string &source = "<config>");
  static RunConfig load(const std::filesystem::path &path);

  void validate() const;
  // Fully resolved settings; hash() is FNV-1a over its compact dump.
  Json to_json() const;
  std::string hash() const;

  TrackConfig track(const std::string &name) const;
  const ReconConfig &recon_config(ReconMethod m) const;
  std::vector<double> fractions() const;
};

} // namespace mrb
