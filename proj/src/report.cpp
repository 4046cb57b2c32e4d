#include "mrbench/report.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "mrbench/error.hpp"
#include "mrbench/pipeline.hpp"
#include "mrbench/study.hpp"

namespace mrb {

namespace {

std::string f3(double v) { return fmt::format("{:.3f}", v); }
std::string f4(double v) { return fmt::format("{:.4f}", v); }
std::string fe(double v) { return fmt::format("{:.4e}", v); }

void board_md(std::ostringstream &md, const std::vector<ScoreCard> &rows, const std::string &track)
{
  auto const accels = track_accelerations(track);
  md << "| Rank | Team | Submission | Submitted |";
  for (int a : accels) {
    md << fmt::format(" SSIM R{0} | NMSE R{0} | PSNR R{0} |", a);
  }
  md << "\n|---|---|---|---|";
  for (std::size_t i = 0; i < accels.size(); ++i) {
    md << "---|---|---|";
  }
  md << "\n";
  for (const auto &c : rows) {
    md << fmt::format("| {} | {} | {} | {} |", c.rank, c.team_id, c.submission_id, format_rfc3339(c.submitted_at));
    for (int a : accels) {
      const auto &o = c.reports.at(a).overall;
      md << fmt::format(" {} | {} | {} |", f4(o.ssim), fe(o.nmse), f3(o.psnr));
    }
    md << "\n";
  }
  if (rows.empty()) {
    md << "| - | (no entries) | | |\n";
  }
  md << "\n";
}

} // namespace

void write_report(const LeaderboardState &state, const std::filesystem::path &out, std::size_t n_readers)
{
  std::filesystem::create_directories(out);
  std::ostringstream md;
  Json js = Json::object();
  md << "# Challenge report\n\n";
  md << "Challenge window: "
     << (state.closed_at() ? "closed " + format_rfc3339(*state.closed_at()) : std::string("open")) << "\n\n";

  md << "## Leaderboards\n\n";
  for (Phase phase : {Phase::Test, Phase::Challenge}) {
    for (const std::string track : {"multicoil", "singlecoil"}) {
      md << fmt::format("### {} / {}\n\n", to_string(phase), track);
      if (phase == Phase::Challenge && !state.challenge_closed()) {
        md << "Sealed until the window closes.\n\n";
        js["leaderboards"][to_string(phase)][track] = "sealed";
        continue;
      }
      auto const rows = state.rank(track, phase);
      board_md(md, rows, track);
      Json arr = Json::array();
      for (const auto &c : rows) {
        arr.push_back(c.to_json());
      }
      js["leaderboards"][to_string(phase)][track] = arr;
    }
  }

  // SSIM of every challenge submission per track and acceleration.
  std::string ssim_csv = "track,accel,team_id,submission_id,ssim\n";
  if (state.challenge_closed()) {
    md << "## Challenge SSIM by track\n\n| Track | n | min | median | max |\n|---|---|---|---|---|\n";
    for (const auto &st : study_tracks()) {
      std::vector<double> v;
      for (const auto &c : state.rank(st.track, Phase::Challenge, st.accel)) {
        double const s = c.ssim_at(st.accel);
        v.push_back(s);
        ssim_csv += fmt::format("{},{},\"{}\",{},{}\n", st.name, st.accel, c.team_id, c.submission_id, f4(s));
      }
      std::sort(v.begin(), v.end());
      if (v.empty()) {
        md << fmt::format("| {} | 0 | | | |\n", st.name);
        continue;
      }
      double const med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
      md << fmt::format("| {} | {} | {} | {} | {} |\n", st.name, v.size(), f4(v.front()), f4(med), f4(v.back()));
      js["ssim_summary"][st.name] = {{"n", v.size()}, {"min", v.front()}, {"median", med}, {"max", v.back()}};
    }
    md << "\n";
  }
  write_text(out / "ssim_summary.csv", ssim_csv);

  md << "## Reader study\n\n";
  for (const auto &st : study_tracks()) {
    auto const responses = state.study_responses(st.name);
    md << fmt::format("### {}\n\n", st.name);
    if (responses.empty()) {
      md << "No responses.\n\n";
      continue;
    }
    StudyResult res;
    try {
      res = aggregate_ranks(responses, n_readers);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::IncompleteStudy) {
        throw;
      }
      md << fmt::format("Incomplete: {} responses ({}).\n\n", responses.size(), e.detail());
      js["study"][st.name] = {{"status", "incomplete"}, {"responses", responses.size()}};
      continue;
    }
    res.track = st.name;
    write_text(out / fmt::format("study_{}.csv", st.name), res.to_csv());

    // Metrics of each finalist's challenge entry at this acceleration.
    std::vector<TeamMetrics> metrics;
    for (const auto &t : res.teams) {
      for (const auto &c : state.entries()) {
        if (c.phase == Phase::Challenge && c.track == st.track && c.team_id == t.team_id &&
            c.reports.count(st.accel)) {
          const auto &o = c.reports.at(st.accel).overall;
          metrics.push_back({t.team_id, o.ssim, o.psnr, o.nmse});
        }
      }
    }
    md << "| Team | Rank | Avg. rank | SSIM | NMSE | PSNR |\n|---|---|---|---|---|---|\n";
    for (const auto &t : res.teams) {
      auto m = std::find_if(metrics.begin(), metrics.end(), [&](const TeamMetrics &x) { return x.team_id == t.team_id; });
      md << fmt::format("| {} | {} | {} | {} | {} | {} |\n", t.team_id, t.rank_label(), t.avg_rank.text3(),
                        m == metrics.end() ? "" : f3(m->ssim), m == metrics.end() ? "" : fe(m->nmse),
                        m == metrics.end() ? "" : f3(m->psnr));
    }
    md << "\n| Team |";
    for (const auto &c : kCriteria) {
      md << " " << c << " |";
    }
    md << "\n|---|";
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
      md << "---|";
    }
    md << "\n";
    for (const auto &t : res.teams) {
      md << "| " << t.team_id << " |";
      for (const auto &c : kCriteria) {
        auto it = t.criteria.find(c);
        md << " " << (it == t.criteria.end() ? std::string() : it->second.text3()) << " |";
      }
      md << "\n";
    }
    md << "\n";

    if (metrics.size() == res.teams.size()) {
      write_text(out / fmt::format("scatter_{}.csv", st.name), scatter_csv(normalize_for_scatter(metrics, res)));
    }
    std::string grid = "reader_id,case_id,team_id,rank\n";
    for (const auto &r : res.responses) {
      for (const auto &[team, rank] : r.ranks) {
        grid += fmt::format("{},{},\"{}\",{}\n", r.reader_id, r.case_id, team, rank);
      }
    }
    write_text(out / fmt::format("rank_grid_{}.csv", st.name), grid);
    Json sj = res.to_json();
    sj.erase("responses");
    js["study"][st.name] = sj;
  }
  write_text(out / "report.md", md.str());
  write_json(out / "report.json", js);
}

} // namespace mrb
