#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

inline const std::vector<std::string> kCriteria = {"artifacts", "sharpness", "cnr", "diagnostic_confidence"};
inline constexpr int kScaleMin = 1;
inline constexpr int kScaleMax = 4;

// Exact mean of integer votes.
struct Rational {
  long long num = 0;
  long long den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  // Round half up at 3 decimals, from the integers.
  std::string text3() const;
  int compare(const Rational &o) const;
  bool operator==(const Rational &o) const { return compare(o) == 0; }
};

struct StudyCase {
  std::string case_id;
  Contrast contrast = Contrast::PD;
};

struct Finalist {
  std::string team_id;
  std::string submission_id;
};

// Blinded reading plan for one study track (e.g. "mc_r8").
struct StudyPlan {
  std::string track;
  std::uint64_t seed = 0;
  std::vector<Finalist> finalists;
  std::vector<StudyCase> cases;
  std::vector<std::string> readers;
  // labels[case][reader][label] = index into finalists
  std::vector<std::vector<std::vector<std::size_t>>> labels;

  std::vector<std::string> label_names() const;
  std::size_t case_index(const std::string &case_id) const;
  std::size_t reader_index(const std::string &reader_id) const;
  // Finalist index behind a label, and the reverse.
  std::size_t unblind(std::size_t case_idx, std::size_t reader_idx, const std::string &label) const;
  std::string blind(std::size_t case_idx, std::size_t reader_idx, std::size_t finalist) const;

  Json to_json() const;
  static StudyPlan from_json(const Json &j);
};

std::string reader_id(std::size_t index);

// Seeded sample of n_cases, at least one per contrast when n_cases >= 2;
// labels shuffled per (case, reader) from (seed, case_id, reader_id).
StudyPlan build_study_plan(const std::string &track, const std::vector<Finalist> &finalists,
                           std::vector<StudyCase> candidates, std::size_t n_cases = 5, std::size_t n_readers = 7,
                           std::uint64_t seed = 0);

// One reader's answer for one case, keyed by blinded label.
struct ReaderResponse {
  std::string reader_id;
  std::string track;
  std::string case_id;
  std::map<std::string, int> ranks;
  std::map<std::string, std::map<std::string, int>> scores;

  Json to_json() const;
  static ReaderResponse from_json(const Json &j);
};

// Same answer keyed by team id.
struct UnblindedResponse {
  std::string reader_id;
  std::string case_id;
  std::map<std::string, int> ranks;
  std::map<std::string, std::map<std::string, int>> scores;

  Json to_json() const;
  static UnblindedResponse from_json(const Json &j);
};

// Rank bijection first (InvalidPermutation), then the criterion grid
// (IncompleteResponse, OutOfScale). Unknown reader/case or wrong track ->
// InvalidArgument.
UnblindedResponse validate_response(const ReaderResponse &resp, const StudyPlan &plan);

struct TeamStanding {
  std::string team_id;
  Rational avg_rank;
  std::size_t final_rank = 0;
  bool tied = false;
  std::map<std::string, Rational> criteria;

  // "1" or "1 (tie)"
  std::string rank_label() const;
};

struct StudyResult {
  std::string track;
  std::vector<TeamStanding> teams; // by final rank, then team id
  std::vector<UnblindedResponse> responses;
  // per reader: team -> mean rank over that reader's cases
  std::map<std::string, std::map<std::string, Rational>> per_reader;

  const TeamStanding &team(const std::string &id) const;
  Json to_json() const;
  std::string to_csv() const;
};

// Needs every reader to have answered the same set of cases over the same
// teams; otherwise IncompleteStudy. Ties are exact rational equality.
StudyResult aggregate_ranks(const std::vector<UnblindedResponse> &responses, std::size_t n_readers = 7);

// team -> criterion -> mean over all responses; same completeness rule.
std::map<std::string, std::map<std::string, Rational>>
aggregate_criteria(const std::vector<UnblindedResponse> &responses, std::size_t n_readers = 7);

// value / max for higher-is-better, min / value for lower-is-better. Lower-
// is-better values are floored at kNmseFloor; `capped` reports whether that
// happened.
inline constexpr double kNmseFloor = 1e-20;
std::vector<double> normalize_higher(const std::vector<double> &values);
std::vector<double> normalize_lower(const std::vector<double> &values, bool *capped = nullptr);

struct TeamMetrics {
  std::string team_id;
  double ssim = 0.0;
  double psnr = 0.0;
  double nmse = 0.0;
};

struct ScatterRow {
  std::string metric;
  std::string team_id;
  double raw = 0.0;
  double normalized = 0.0;
  double avg_rank = 0.0;
  bool capped = false;
};

std::vector<ScatterRow> normalize_for_scatter(const std::vector<TeamMetrics> &metrics, const StudyResult &study);
std::string scatter_csv(const std::vector<ScatterRow> &rows);

} // namespace mrb
