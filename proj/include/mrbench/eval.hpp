#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mrbench/metrics.hpp"
#include "mrbench/study.hpp"
#include "mrbench/types.hpp"

namespace mrb {

// UTC seconds since the epoch <-> "YYYY-MM-DDTHH:MM:SSZ". Parsing also accepts
// fractional seconds (dropped) and numeric offsets.
std::int64_t parse_rfc3339(const std::string &text);
std::string format_rfc3339(std::int64_t seconds);
std::int64_t utc_now();

// ---- dataset split -------------------------------------------------------

inline const std::vector<std::string> kSplitNames = {"training",     "validation",   "test_mc",
                                                     "test_sc",      "challenge_mc", "challenge_sc"};

// Reference proportions: 973 / 199 / 118 / 108 / 104 / 92 of 1594 cases.
std::vector<double> default_split_fractions();

struct SplitManifest {
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> splits;

  std::map<std::string, std::size_t> counts() const;
  Json to_json() const;
  static SplitManifest from_json(const Json &j);
};

// Partition sizes for n items: floor(n f_i), then the remaining
// floor(n sum f) - sum floor(n f_i) items go one each to the largest
// fractional parts (lower index first on equal parts).
std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double> &fractions);

// Sorts the ids, shuffles them with the seed, and cuts contiguous blocks in
// kSplitNames order. Fractions may name fewer than six splits; the rest are
// empty.
SplitManifest split_dataset(std::vector<std::string> case_ids, std::uint64_t seed,
                            const std::vector<double> &fractions = default_split_fractions());

// ---- submissions and leaderboard -----------------------------------------

enum class Phase { Test, Challenge };
std::string to_string(Phase p);
Phase phase_from_string(const std::string &s);

// Leaderboard tracks group accelerations: "multicoil" scores R=4 and R=8,
// "singlecoil" scores R=4 only.
std::vector<int> track_accelerations(const std::string &track);
int ranking_acceleration(const std::string &track);
void validate_track(const std::string &track);
std::string split_for(Phase phase, const std::string &track);

// Reader-study tracks: mc_r4, mc_r8, sc_r4.
struct StudyTrack {
  std::string name;
  std::string track;
  int accel = 4;
};
std::vector<StudyTrack> study_tracks();
StudyTrack study_track(const std::string &name);

struct Submission {
  std::string team_id;
  std::string track;
  Phase phase = Phase::Test;
  std::int64_t submitted_at = 0;
  std::string description;
  // acceleration -> reconstructed volumes, one per case of the split
  std::map<int, std::vector<MagnitudeVolume>> volumes;
};

struct ScoreCard {
  std::string submission_id;
  std::string team_id;
  std::string track;
  Phase phase = Phase::Test;
  std::int64_t submitted_at = 0;
  std::string description;
  std::map<int, MetricReport> reports;
  std::size_t rank = 0;

  double ranking_ssim() const;
  double ssim_at(int accel) const;
  // Without per-volume rows; `full` adds them.
  Json to_json(bool full = false) const;
  static ScoreCard from_json(const Json &j);
};

struct FinalistSelection {
  std::vector<ScoreCard> finalists;
  bool fewer_than_k = false;
  bool tie_at_cutoff = false;
  Json to_json() const;
};

// Pure state derived from the event log.
class LeaderboardState {
public:
  // Applies one log event; throws InvalidData on an unknown type.
  void apply(const Json &event);

  bool challenge_closed() const { return closed_at_.has_value(); }
  std::optional<std::int64_t> closed_at() const { return closed_at_; }
  std::size_t event_count() const { return events_; }
  const std::vector<ScoreCard> &entries() const { return entries_; }
  const ScoreCard &entry(const std::string &submission_id) const;
  const std::vector<Json> &study_responses() const { return study_responses_; }
  // Unblinded responses recorded for one study track, in log order.
  std::vector<UnblindedResponse> study_responses(const std::string &study_track) const;

  // Throws the rejection reason; checks window, single challenge entry and
  // the 24 h test rate limit.
  void check_admissible(const std::string &team_id, const std::string &track, Phase phase, std::int64_t now) const;

  // Challenge phase before close -> Sealed. Test phase keeps each team's
  // best entry. Order: SSIM desc, then earlier time, then id. accel 0 means
  // the track's ranking acceleration.
  std::vector<ScoreCard> rank(const std::string &track, Phase phase, int accel = 0) const;
  FinalistSelection select_finalists(const std::string &track, std::size_t k = 4, int accel = 0) const;

  // Every visible board plus the sealed flag, as canonical JSON.
  Json standings() const;

private:
  std::vector<ScoreCard> entries_;
  std::map<std::string, std::size_t> by_id_;
  std::optional<std::int64_t> closed_at_;
  std::vector<Json> study_responses_;
  std::size_t events_ = 0;
};

inline constexpr std::int64_t kRateLimitSeconds = 24 * 3600;

// Append-only JSON-lines log, one compact event per line.
class EventLog {
public:
  explicit EventLog(std::filesystem::path path);
  const std::filesystem::path &path() const { return path_; }
  void append(const Json &event);
  std::vector<Json> read_all() const;

private:
  std::filesystem::path path_;
};

LeaderboardState replay(const std::vector<Json> &events);
LeaderboardState replay_file(const std::filesystem::path &log);

// Ground-truth volumes for the scored splits, keyed by split then case_id.
using ReferenceSet = std::map<std::string, std::map<std::string, MagnitudeVolume>>;

struct EvalConfig {
  std::filesystem::path root; // holds events.jsonl and submissions/
  unsigned jobs = 1;
};

// Single-writer service: ingest serialises on a mutex; reads copy a snapshot.
class EvalService {
public:
  EvalService(EvalConfig cfg, ReferenceSet refs);

  // Returns the new scorecard or throws WindowClosed, AlreadySubmitted,
  // RateLimited or SubmissionIncomplete. Accepted volumes are stored under
  // root/submissions/<id>/R<accel>/<case_id>.ksb1.
  ScoreCard ingest(const Submission &sub);
  void close_window(std::int64_t at);
  // `response` carries track, reader_id and case_id; a second response for
  // the same triple is AlreadySubmitted.
  void record_study_response(const Json &response);

  LeaderboardState snapshot() const;
  std::filesystem::path submission_dir(const std::string &id) const;
  const ReferenceSet &references() const { return refs_; }
  const std::filesystem::path &root() const { return cfg_.root; }
  const EventLog &log() const { return log_; }

private:
  EvalConfig cfg_;
  ReferenceSet refs_;
  EventLog log_;
  mutable std::mutex mutex_;
  LeaderboardState state_;
};

// Scores one submission against the split's references; volumes are matched
// by case_id per acceleration. Missing/extra accelerations or cases raise
// SubmissionIncomplete.
std::map<int, MetricReport> score_submission(const Submission &sub, const ReferenceSet &refs, unsigned jobs = 1);

} // namespace mrb
