#include "mrbench/study_fixture.hpp"

#include <array>

#include <fmt/format.h>

#include "mrbench/error.hpp"

namespace mrb {

std::vector<std::string> fixture_tracks() { return {"mc_r4", "mc_r8", "sc_r4"}; }

std::vector<FixtureTeam> fixture_teams(const std::string &track)
{
  if (track == "mc_r4") {
    return {
        {"Philips & LUMC", {4, 2, 3, 1, 1, 2, 3}, {19, 16, 16, 14}, 0.927, 0.005, 39.907},
        {"MSDC-RNN", {2, 4, 2, 2, 3, 1, 2}, {18, 16, 17, 13}, 0.927, 0.005, 39.740},
        {"holykspace", {3, 3, 4, 3, 2, 3, 1}, {14, 21, 19, 13}, 0.927, 0.005, 39.715},
        {"AM", {1, 1, 1, 4, 4, 4, 4}, {14, 21, 14, 14}, 0.928, 0.005, 39.807},
    };
  }
  if (track == "mc_r8") {
    return {
        {"Philips & LUMC", {1, 1, 1, 1, 1, 2, 2}, {12, 16, 16, 16}, 0.901, 0.0086, 37.437},
        {"holykspace", {2, 2, 4, 4, 4, 1, 1}, {15, 22, 16, 20}, 0.899, 0.0092, 37.009},
        {"AM", {3, 4, 2, 2, 2, 4, 4}, {13, 23, 17, 22}, 0.901, 0.0089, 37.173},
        {"AImsterdam", {4, 3, 3, 3, 3, 3, 3}, {19, 20, 21, 22}, 0.898, 0.0096, 36.816},
    };
  }
  if (track == "sc_r4") {
    return {
        {"AImsterdam", {1, 1, 1, 1, 1, 2, 2}, {17, 16, 15, 16}, 0.754, 0.031, 32.549},
        {"JG", {2, 2, 3, 3, 3, 1, 4}, {21, 19, 17, 18}, 0.750, 0.031, 32.476},
        {"Philips & LUMC", {3, 3, 2, 2, 2, 4, 3}, {19, 21, 19, 20}, 0.751, 0.030, 32.666},
        {"Samoyed", {4, 4, 4, 4, 4, 3, 1}, {22, 23, 21, 23}, 0.751, 0.029, 32.761},
    };
  }
  throw Error(ErrorCode::InvalidArgument, "no fixture for study track '" + track + "'");
}

namespace {

// Spreads `sum` over 7 readers as evenly as possible; the larger votes go to
// the middle readers.
std::vector<int> spread(int sum)
{
  int const q = sum / 7;
  int const r = sum % 7;
  std::vector<int> v(7, q);
  for (int i = 0; i < r; ++i) {
    v[static_cast<std::size_t>(1 + i % 6)] += 1;
  }
  return v;
}

} // namespace

std::vector<UnblindedResponse> fixture_responses(const std::string &track)
{
  auto const teams = fixture_teams(track);
  std::vector<UnblindedResponse> out(7);
  for (std::size_t r = 0; r < 7; ++r) {
    out[r].reader_id = reader_id(r);
    out[r].case_id = "fixture_case";
  }
  for (const auto &t : teams) {
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
      auto const votes = spread(t.criteria[c]);
      for (std::size_t r = 0; r < 7; ++r) {
        out[r].scores[t.team_id][kCriteria[c]] = votes[r];
      }
    }
    for (std::size_t r = 0; r < 7; ++r) {
      out[r].ranks[t.team_id] = t.ranks[r];
    }
  }
  return out;
}

std::vector<TeamMetrics> fixture_metrics(const std::string &track)
{
  std::vector<TeamMetrics> out;
  for (const auto &t : fixture_teams(track)) {
    // RMSE squared stands in for NMSE; min/value normalisation ignores scale.
    out.push_back({t.team_id, t.ssim, t.psnr, t.rmse * t.rmse});
  }
  return out;
}

std::vector<Json> fixture_events()
{
  std::int64_t const t0 = parse_rfc3339("2019-10-01T12:00:00Z");
  // team -> accel -> (ssim, rmse, psnr). Teams that reached only one of the
  // two multi-coil study tracks get values below that track's cutoff.
  std::map<std::string, std::map<int, std::array<double, 3>>> mc, sc;
  for (const auto &[track, accel] : {std::pair<std::string, int>{"mc_r4", 4}, {"mc_r8", 8}}) {
    for (const auto &t : fixture_teams(track)) {
      mc[t.team_id][accel] = {t.ssim, t.rmse, t.psnr};
    }
  }
  mc["MSDC-RNN"][8] = {0.890, 0.0100, 36.500};
  mc["AImsterdam"][4] = {0.920, 0.0060, 39.000};
  for (const auto &t : fixture_teams("sc_r4")) {
    sc[t.team_id][4] = {t.ssim, t.rmse, t.psnr};
  }

  std::vector<Json> events;
  std::int64_t at = t0;
  int seq = 0;
  auto add = [&](const std::string &track, const std::string &team, const std::map<int, std::array<double, 3>> &m) {
    ScoreCard c;
    c.submission_id = fmt::format("challenge-{}-{:05d}", track, ++seq);
    c.team_id = team;
    c.track = track;
    c.phase = Phase::Challenge;
    c.submitted_at = at;
    at += 3600;
    for (const auto &[accel, v] : m) {
      MetricValues mv{v[1] * v[1], v[2], v[0], 1};
      VolumeScore vs{"fixture_case", Contrast::PD, mv};
      c.reports[accel] = MetricReport::aggregate({vs});
    }
    events.push_back({{"type", "submission"}, {"card", c.to_json(true)}});
  };
  for (const auto &[team, m] : mc) {
    add("multicoil", team, m);
  }
  for (const auto &[team, m] : sc) {
    add("singlecoil", team, m);
  }
  events.push_back({{"type", "close_window"}, {"at", format_rfc3339(at)}});
  for (const auto &track : fixture_tracks()) {
    for (const auto &r : fixture_responses(track)) {
      Json j = r.to_json();
      j["track"] = track;
      events.push_back({{"type", "study_response"}, {"response", j}});
    }
  }
  return events;
}

} // namespace mrb
