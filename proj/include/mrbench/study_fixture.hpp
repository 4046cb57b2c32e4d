#pragma once

#include <string>
#include <vector>

#include "mrbench/eval.hpp"
#include "mrbench/study.hpp"

namespace mrb {

// Reference reading outcome for the three study tracks: one case, seven
// readers, four finalists. Rank columns are per-reader permutations and the
// criterion sums reproduce the published per-team means.
struct FixtureTeam {
  std::string team_id;
  std::vector<int> ranks;    // reader 1..7
  std::vector<int> criteria; // sum over readers, in kCriteria order
  double ssim = 0.0;
  double rmse = 0.0;
  double psnr = 0.0;
};

std::vector<std::string> fixture_tracks(); // mc_r4, mc_r8, sc_r4
std::vector<FixtureTeam> fixture_teams(const std::string &track);
std::vector<UnblindedResponse> fixture_responses(const std::string &track);
std::vector<TeamMetrics> fixture_metrics(const std::string &track);

// A closed challenge whose scorecards carry the fixture metrics and whose
// log holds the fixture study responses.
std::vector<Json> fixture_events();

} // namespace mrb
