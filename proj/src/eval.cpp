#include "mrbench/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "mrbench/container.hpp"
#include "mrbench/error.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

// ---- time ------------------------------------------------------------------

std::int64_t parse_rfc3339(const std::string &text)
{
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, used = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &used) != 6 || used != 19) {
    throw Error(ErrorCode::InvalidArgument, "not an RFC-3339 timestamp: '" + text + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw Error(ErrorCode::InvalidArgument, "timestamp field out of range: '" + text + "'");
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t const digits = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    if (pos == digits) {
      throw Error(ErrorCode::InvalidArgument, "empty fractional seconds in '" + text + "'");
    }
  }
  std::int64_t offset = 0;
  std::string const zone = text.substr(pos);
  if (zone == "Z" || zone == "z") {
    offset = 0;
  } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
    int oh = 0, om = 0;
    if (std::sscanf(zone.c_str() + 1, "%2d:%2d", &oh, &om) != 2 || oh > 23 || om > 59) {
      throw Error(ErrorCode::InvalidArgument, "bad UTC offset in '" + text + "'");
    }
    offset = (zone[0] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
  } else {
    throw Error(ErrorCode::InvalidArgument, "missing UTC offset in '" + text + "'");
  }
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  return static_cast<std::int64_t>(timegm(&tm)) - offset;
}

std::string format_rfc3339(std::int64_t seconds)
{
  std::time_t const t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t utc_now()
{
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---- split -----------------------------------------------------------------

std::vector<double> default_split_fractions()
{
  std::vector<double> f;
  for (double n : {973.0, 199.0, 118.0, 108.0, 104.0, 92.0}) {
    f.push_back(n / 1594.0);
  }
  return f;
}

std::map<std::string, std::size_t> SplitManifest::counts() const
{
  std::map<std::string, std::size_t> c;
  for (const auto &[name, ids] : splits) {
    c[name] = ids.size();
  }
  return c;
}

Json SplitManifest::to_json() const
{
  Json j = {{"seed", seed}, {"splits", splits}};
  j["counts"] = counts();
  return j;
}

SplitManifest SplitManifest::from_json(const Json &j)
{
  SplitManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  return m;
}

std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double> &fractions)
{
  if (fractions.size() > kSplitNames.size()) {
    throw Error(ErrorCode::InvalidArgument, "more fractions than splits");
  }
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw Error(ErrorCode::InvalidArgument, "split fractions must be finite and >= 0");
    }
    sum += f;
  }
  if (sum > 1.0 + 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split fractions sum above 1");
  }
  // Absorbs representation error such as 20 * 0.15 = 3.0000000000000004.
  constexpr double eps = 1e-9;
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<double> rem(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    double const exact = static_cast<double>(n) * fractions[i];
    sizes[i] = static_cast<std::size_t>(std::floor(exact + eps));
    rem[i] = std::max(0.0, exact - static_cast<double>(sizes[i]));
    assigned += sizes[i];
  }
  std::size_t const total = std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * sum + eps)));
  std::vector<std::size_t> order(fractions.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  // Remainders compared at 1e-9 resolution so mathematically equal parts tie.
  std::vector<long long> key(rem.size());
  for (std::size_t i = 0; i < rem.size(); ++i) {
    key[i] = std::llround(rem[i] * 1e9);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k) {
    ++sizes[order[k]];
    ++assigned;
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] > 0.0 && sizes[i] == 0) {
      throw Error(ErrorCode::SplitInfeasible,
                  fmt::format("{} cases leave split '{}' empty", n, kSplitNames[i]));
    }
  }
  return sizes;
}

SplitManifest split_dataset(std::vector<std::string> case_ids, std::uint64_t seed,
                            const std::vector<double> &fractions)
{
  std::sort(case_ids.begin(), case_ids.end());
  if (std::adjacent_find(case_ids.begin(), case_ids.end()) != case_ids.end()) {
    throw Error(ErrorCode::InvalidArgument, "duplicate case id");
  }
  auto const sizes = split_sizes(case_ids.size(), fractions);
  SplitMix64 rng(derive_seed(seed, "split"));
  seeded_shuffle(case_ids, rng);
  SplitManifest m;
  m.seed = seed;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    std::size_t const len = i < sizes.size() ? sizes[i] : 0;
    m.splits[kSplitNames[i]] = std::vector<std::string>(case_ids.begin() + static_cast<std::ptrdiff_t>(pos),
                                                        case_ids.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return m;
}

// ---- tracks and phases ------------------------------------------------------

std::string to_string(Phase p) { return p == Phase::Test ? "test" : "challenge"; }

Phase phase_from_string(const std::string &s)
{
  if (s == "test") {
    return Phase::Test;
  }
  if (s == "challenge") {
    return Phase::Challenge;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown phase '" + s + "'");
}

void validate_track(const std::string &track)
{
  if (track != "multicoil" && track != "singlecoil") {
    throw Error(ErrorCode::InvalidArgument, "unknown track '" + track + "'");
  }
}

std::vector<int> track_accelerations(const std::string &track)
{
  validate_track(track);
  return track == "multicoil" ? std::vector<int>{4, 8} : std::vector<int>{4};
}

int ranking_acceleration(const std::string &track)
{
  validate_track(track);
  return track == "multicoil" ? 8 : 4;
}

std::string split_for(Phase phase, const std::string &track)
{
  validate_track(track);
  return (phase == Phase::Test ? "test_" : "challenge_") + std::string(track == "multicoil" ? "mc" : "sc");
}

std::vector<StudyTrack> study_tracks()
{
  return {{"mc_r4", "multicoil", 4}, {"mc_r8", "multicoil", 8}, {"sc_r4", "singlecoil", 4}};
}

StudyTrack study_track(const std::string &name)
{
  for (auto &t : study_tracks()) {
    if (t.name == name) {
      return t;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown study track '" + name + "'");
}

// ---- scorecards ---------------------------------------------------------------

double ScoreCard::ranking_ssim() const { return ssim_at(ranking_acceleration(track)); }

double ScoreCard::ssim_at(int accel) const
{
  auto it = reports.find(accel);
  if (it == reports.end()) {
    throw Error(ErrorCode::NotFound, fmt::format("{} has no R={} report", submission_id, accel));
  }
  return it->second.overall.ssim;
}

Json ScoreCard::to_json(bool full) const
{
  Json rep = Json::object();
  for (const auto &[accel, r] : reports) {
    Json rj = r.to_json();
    if (!full) {
      rj.erase("per_volume");
    }
    rep[fmt::format("R{}", accel)] = rj;
  }
  return {{"submission_id", submission_id},
          {"team_id", team_id},
          {"track", track},
          {"phase", to_string(phase)},
          {"submitted_at", format_rfc3339(submitted_at)},
          {"description", description},
          {"reports", rep},
          {"rank", rank}};
}

ScoreCard ScoreCard::from_json(const Json &j)
{
  ScoreCard c;
  c.submission_id = j.at("submission_id").get<std::string>();
  c.team_id = j.at("team_id").get<std::string>();
  c.track = j.at("track").get<std::string>();
  validate_track(c.track);
  c.phase = phase_from_string(j.at("phase").get<std::string>());
  c.submitted_at = parse_rfc3339(j.at("submitted_at").get<std::string>());
  c.description = j.value("description", std::string());
  for (const auto &[key, r] : j.at("reports").items()) {
    if (key.size() < 2 || key[0] != 'R') {
      throw Error(ErrorCode::InvalidData, "bad report key '" + key + "'");
    }
    c.reports[std::stoi(key.substr(1))] = MetricReport::from_json(r);
  }
  c.rank = j.value("rank", std::size_t{0});
  return c;
}

Json FinalistSelection::to_json() const
{
  Json list = Json::array();
  for (const auto &c : finalists) {
    list.push_back(c.to_json());
  }
  return {{"finalists", list}, {"fewer_than_k", fewer_than_k}, {"tie_at_cutoff", tie_at_cutoff}};
}

// ---- state -------------------------------------------------------------------

namespace {

bool ranks_before(const ScoreCard &a, const ScoreCard &b, int accel)
{
  double const sa = a.ssim_at(accel);
  double const sb = b.ssim_at(accel);
  if (sa != sb) {
    return sa > sb;
  }
  if (a.submitted_at != b.submitted_at) {
    return a.submitted_at < b.submitted_at;
  }
  return a.submission_id < b.submission_id;
}

} // namespace

void LeaderboardState::apply(const Json &event)
{
  std::string const type = event.at("type").get<std::string>();
  if (type == "submission") {
    ScoreCard card = ScoreCard::from_json(event.at("card"));
    if (by_id_.count(card.submission_id)) {
      throw Error(ErrorCode::InvalidData, "duplicate submission id " + card.submission_id);
    }
    by_id_[card.submission_id] = entries_.size();
    entries_.push_back(std::move(card));
  } else if (type == "close_window") {
    if (!closed_at_) {
      closed_at_ = parse_rfc3339(event.at("at").get<std::string>());
    }
  } else if (type == "study_response") {
    study_responses_.push_back(event.at("response"));
  } else {
    throw Error(ErrorCode::InvalidData, "unknown event type '" + type + "'");
  }
  ++events_;
}

std::vector<UnblindedResponse> LeaderboardState::study_responses(const std::string &study_track) const
{
  std::vector<UnblindedResponse> out;
  for (const auto &r : study_responses_) {
    if (r.value("track", std::string()) == study_track) {
      out.push_back(UnblindedResponse::from_json(r));
    }
  }
  return out;
}

const ScoreCard &LeaderboardState::entry(const std::string &submission_id) const
{
  auto it = by_id_.find(submission_id);
  if (it == by_id_.end()) {
    throw Error(ErrorCode::NotFound, "no submission " + submission_id);
  }
  return entries_[it->second];
}

void LeaderboardState::check_admissible(const std::string &team_id, const std::string &track, Phase phase,
                                        std::int64_t now) const
{
  validate_track(track);
  if (phase == Phase::Challenge) {
    if (closed_at_) {
      throw Error(ErrorCode::WindowClosed, "challenge window closed at " + format_rfc3339(*closed_at_));
    }
    for (const auto &e : entries_) {
      if (e.phase == Phase::Challenge && e.track == track && e.team_id == team_id) {
        throw Error(ErrorCode::AlreadySubmitted, "team already has challenge entry " + e.submission_id);
      }
    }
    return;
  }
  for (const auto &e : entries_) {
    if (e.phase == Phase::Test && e.track == track && e.team_id == team_id && now - e.submitted_at < kRateLimitSeconds) {
      throw Error(ErrorCode::RateLimited,
                  fmt::format("last test submission {} at {}; next allowed at {}", e.submission_id,
                              format_rfc3339(e.submitted_at), format_rfc3339(e.submitted_at + kRateLimitSeconds)));
    }
  }
}

std::vector<ScoreCard> LeaderboardState::rank(const std::string &track, Phase phase, int accel) const
{
  auto const accels = track_accelerations(track);
  if (accel == 0) {
    accel = ranking_acceleration(track);
  } else if (std::find(accels.begin(), accels.end(), accel) == accels.end()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("track {} has no R={}", track, accel));
  }
  if (phase == Phase::Challenge && !closed_at_) {
    throw Error(ErrorCode::Sealed, "challenge standings are hidden until the window closes");
  }
  std::vector<ScoreCard> rows;
  for (const auto &e : entries_) {
    if (e.track == track && e.phase == phase) {
      rows.push_back(e);
    }
  }
  std::sort(rows.begin(), rows.end(),
            [accel](const ScoreCard &a, const ScoreCard &b) { return ranks_before(a, b, accel); });
  if (phase == Phase::Test) {
    std::set<std::string> seen;
    std::vector<ScoreCard> best;
    for (auto &r : rows) {
      if (seen.insert(r.team_id).second) {
        best.push_back(std::move(r));
      }
    }
    rows = std::move(best);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank = i + 1;
  }
  return rows;
}

FinalistSelection LeaderboardState::select_finalists(const std::string &track, std::size_t k, int accel) const
{
  if (k < 1) {
    throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  }
  if (accel == 0) {
    accel = ranking_acceleration(track);
  }
  auto rows = rank(track, Phase::Challenge, accel);
  FinalistSelection sel;
  if (rows.size() <= k) {
    sel.fewer_than_k = rows.size() < k;
    sel.finalists = std::move(rows);
    return sel;
  }
  double const cutoff = rows[k - 1].ssim_at(accel);
  std::size_t n = k;
  while (n < rows.size() && rows[n].ssim_at(accel) == cutoff) {
    ++n;
  }
  sel.tie_at_cutoff = n > k;
  sel.finalists.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n));
  return sel;
}

Json LeaderboardState::standings() const
{
  Json j = Json::object();
  for (Phase phase : {Phase::Test, Phase::Challenge}) {
    for (const std::string track : {"multicoil", "singlecoil"}) {
      if (phase == Phase::Challenge && !closed_at_) {
        j[to_string(phase)][track] = "sealed";
        continue;
      }
      Json rows = Json::array();
      for (const auto &c : rank(track, phase)) {
        rows.push_back(c.to_json());
      }
      j[to_string(phase)][track] = rows;
    }
  }
  j["challenge_closed_at"] = closed_at_ ? Json(format_rfc3339(*closed_at_)) : Json(nullptr);
  return j;
}

// ---- log ---------------------------------------------------------------------

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {}

void EventLog::append(const Json &event)
{
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << event.dump() << '\n';
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot append to " + path_.string());
  }
}

std::vector<Json> EventLog::read_all() const
{
  std::vector<Json> events;
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    return events;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      events.push_back(Json::parse(line));
    } catch (const Json::exception &e) {
      throw Error(ErrorCode::InvalidData, fmt::format("{}:{}: {}", path_.string(), lineno, e.what()));
    }
  }
  return events;
}

LeaderboardState replay(const std::vector<Json> &events)
{
  LeaderboardState s;
  for (const auto &e : events) {
    s.apply(e);
  }
  return s;
}

LeaderboardState replay_file(const std::filesystem::path &log) { return replay(EventLog(log).read_all()); }

// ---- scoring -----------------------------------------------------------------

std::map<int, MetricReport> score_submission(const Submission &sub, const ReferenceSet &refs, unsigned jobs)
{
  auto const accels = track_accelerations(sub.track);
  std::string const split = split_for(sub.phase, sub.track);
  auto it = refs.find(split);
  if (it == refs.end() || it->second.empty()) {
    throw Error(ErrorCode::NotFound, "no references for split " + split);
  }
  std::vector<MagnitudeVolume> gt;
  for (const auto &[id, v] : it->second) {
    gt.push_back(v);
  }
  for (const auto &[accel, vols] : sub.volumes) {
    if (std::find(accels.begin(), accels.end(), accel) == accels.end()) {
      throw Error(ErrorCode::SubmissionIncomplete, fmt::format("track {} has no R={}", sub.track, accel));
    }
  }
  std::map<int, MetricReport> out;
  for (int accel : accels) {
    auto v = sub.volumes.find(accel);
    if (v == sub.volumes.end()) {
      throw Error(ErrorCode::SubmissionIncomplete, fmt::format("no R={} volumes", accel));
    }
    out[accel] = score_volume_set(gt, v->second, jobs);
  }
  return out;
}

// ---- service -------------------------------------------------------------------

EvalService::EvalService(EvalConfig cfg, ReferenceSet refs)
    : cfg_(std::move(cfg)), refs_(std::move(refs)), log_(cfg_.root / "events.jsonl")
{
  std::filesystem::create_directories(cfg_.root / "submissions");
  state_ = replay(log_.read_all());
}

std::filesystem::path EvalService::submission_dir(const std::string &id) const
{
  return cfg_.root / "submissions" / id;
}

ScoreCard EvalService::ingest(const Submission &sub)
{
  std::lock_guard lock(mutex_);
  if (sub.team_id.empty()) {
    throw Error(ErrorCode::InvalidArgument, "submission has no team");
  }
  state_.check_admissible(sub.team_id, sub.track, sub.phase, sub.submitted_at);
  ScoreCard card;
  card.reports = score_submission(sub, refs_, cfg_.jobs);
  card.submission_id = fmt::format("{}-{}-{:05d}", to_string(sub.phase), sub.track, state_.event_count() + 1);
  card.team_id = sub.team_id;
  card.track = sub.track;
  card.phase = sub.phase;
  card.submitted_at = sub.submitted_at;
  card.description = sub.description;

  auto const dir = submission_dir(card.submission_id);
  for (const auto &[accel, vols] : sub.volumes) {
    auto const sub_dir = dir / fmt::format("R{}", accel);
    std::filesystem::create_directories(sub_dir);
    for (const auto &v : vols) {
      CaseFile f;
      f.attrs = v.attrs;
      f.rss = v;
      write_case(sub_dir / (v.attrs.case_id + ".ksb1"), f);
    }
  }
  Json const event = {{"type", "submission"}, {"card", card.to_json(true)}};
  log_.append(event);
  state_.apply(event);
  return card;
}

void EvalService::close_window(std::int64_t at)
{
  std::lock_guard lock(mutex_);
  if (state_.challenge_closed()) {
    return;
  }
  Json const event = {{"type", "close_window"}, {"at", format_rfc3339(at)}};
  log_.append(event);
  state_.apply(event);
}

void EvalService::record_study_response(const Json &response)
{
  std::lock_guard lock(mutex_);
  auto key = [](const Json &r) {
    return std::make_tuple(r.value("track", std::string()), r.value("reader_id", std::string()),
                           r.value("case_id", std::string()));
  };
  for (const auto &r : state_.study_responses()) {
    if (key(r) == key(response)) {
      throw Error(ErrorCode::AlreadySubmitted,
                  fmt::format("{} already answered {}", std::get<1>(key(r)), std::get<2>(key(r))));
    }
  }
  Json const event = {{"type", "study_response"}, {"response", response}};
  log_.append(event);
  state_.apply(event);
}

LeaderboardState EvalService::snapshot() const
{
  std::lock_guard lock(mutex_);
  return state_;
}

} // namespace mrb
