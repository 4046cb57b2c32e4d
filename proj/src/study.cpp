#include "mrbench/study.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mrbench/error.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

// ---- rational ------------------------------------------------------------------

std::string Rational::text3() const
{
  if (den <= 0) {
    throw Error(ErrorCode::InvalidArgument, "rational with non-positive denominator");
  }
  bool const neg = num < 0;
  long long const a = neg ? -num : num;
  // round(a / den * 1000) with halves going up
  long long const milli = (2000 * a + den) / (2 * den);
  return fmt::format("{}{}.{:03d}", neg ? "-" : "", milli / 1000, milli % 1000);
}

int Rational::compare(const Rational &o) const
{
  __int128 const l = static_cast<__int128>(num) * o.den;
  __int128 const r = static_cast<__int128>(o.num) * den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

// ---- plan ------------------------------------------------------------------------

std::string reader_id(std::size_t index) { return fmt::format("reader_{}", index + 1); }

std::vector<std::string> StudyPlan::label_names() const
{
  std::vector<std::string> out;
  for (std::size_t i = 0; i < finalists.size(); ++i) {
    out.emplace_back(1, static_cast<char>('A' + i));
  }
  return out;
}

std::size_t StudyPlan::case_index(const std::string &case_id) const
{
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].case_id == case_id) {
      return i;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "case '" + case_id + "' is not in the study");
}

std::size_t StudyPlan::reader_index(const std::string &rid) const
{
  auto it = std::find(readers.begin(), readers.end(), rid);
  if (it == readers.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown reader '" + rid + "'");
  }
  return static_cast<std::size_t>(it - readers.begin());
}

std::size_t StudyPlan::unblind(std::size_t case_idx, std::size_t reader_idx, const std::string &label) const
{
  auto const names = label_names();
  auto it = std::find(names.begin(), names.end(), label);
  if (it == names.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown label '" + label + "'");
  }
  return labels.at(case_idx).at(reader_idx).at(static_cast<std::size_t>(it - names.begin()));
}

std::string StudyPlan::blind(std::size_t case_idx, std::size_t reader_idx, std::size_t finalist) const
{
  const auto &perm = labels.at(case_idx).at(reader_idx);
  auto it = std::find(perm.begin(), perm.end(), finalist);
  if (it == perm.end()) {
    throw Error(ErrorCode::InvalidArgument, "finalist index out of range");
  }
  return std::string(1, static_cast<char>('A' + (it - perm.begin())));
}

Json StudyPlan::to_json() const
{
  Json fin = Json::array();
  for (const auto &f : finalists) {
    fin.push_back({{"team_id", f.team_id}, {"submission_id", f.submission_id}});
  }
  Json cs = Json::array();
  for (const auto &c : cases) {
    cs.push_back({{"case_id", c.case_id}, {"contrast", to_string(c.contrast)}});
  }
  return {{"track", track}, {"seed", seed}, {"finalists", fin}, {"cases", cs}, {"readers", readers}, {"labels", labels}};
}

StudyPlan StudyPlan::from_json(const Json &j)
{
  StudyPlan p;
  p.track = j.at("track").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  for (const auto &f : j.at("finalists")) {
    p.finalists.push_back({f.at("team_id").get<std::string>(), f.at("submission_id").get<std::string>()});
  }
  for (const auto &c : j.at("cases")) {
    p.cases.push_back({c.at("case_id").get<std::string>(), contrast_from_string(c.at("contrast").get<std::string>())});
  }
  p.readers = j.at("readers").get<std::vector<std::string>>();
  p.labels = j.at("labels").get<std::vector<std::vector<std::vector<std::size_t>>>>();
  if (p.labels.size() != p.cases.size()) {
    throw Error(ErrorCode::InvalidData, "label table does not match the case list");
  }
  for (const auto &per_case : p.labels) {
    if (per_case.size() != p.readers.size()) {
      throw Error(ErrorCode::InvalidData, "label table does not match the reader list");
    }
    for (const auto &perm : per_case) {
      std::vector<std::size_t> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != i || sorted.size() != p.finalists.size()) {
          throw Error(ErrorCode::InvalidData, "label entry is not a permutation of the finalists");
        }
      }
    }
  }
  return p;
}

StudyPlan build_study_plan(const std::string &track, const std::vector<Finalist> &finalists,
                           std::vector<StudyCase> candidates, std::size_t n_cases, std::size_t n_readers,
                           std::uint64_t seed)
{
  if (finalists.empty() || finalists.size() > 26 || n_readers < 1 || n_cases < 1) {
    throw Error(ErrorCode::InvalidArgument, "study needs 1-26 finalists, >= 1 reader and >= 1 case");
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const StudyCase &a, const StudyCase &b) { return a.case_id < b.case_id; });
  if (candidates.size() < n_cases) {
    throw Error(ErrorCode::StudyInfeasible,
                fmt::format("{} cases requested but only {} available", n_cases, candidates.size()));
  }
  std::vector<StudyCase> pd, fs;
  for (const auto &c : candidates) {
    (c.contrast == Contrast::PD ? pd : fs).push_back(c);
  }
  if (n_cases >= 2 && (pd.empty() || fs.empty())) {
    throw Error(ErrorCode::StudyInfeasible, "candidates do not cover both contrasts");
  }
  SplitMix64 rng(derive_seed(seed, "study:" + track));
  std::vector<StudyCase> chosen;
  std::vector<StudyCase> rest;
  if (n_cases >= 2) {
    std::size_t const ip = static_cast<std::size_t>(rng.below(pd.size()));
    std::size_t const iff = static_cast<std::size_t>(rng.below(fs.size()));
    chosen.push_back(pd[ip]);
    chosen.push_back(fs[iff]);
    for (std::size_t i = 0; i < pd.size(); ++i) {
      if (i != ip) {
        rest.push_back(pd[i]);
      }
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (i != iff) {
        rest.push_back(fs[i]);
      }
    }
    std::sort(rest.begin(), rest.end(), [](const StudyCase &a, const StudyCase &b) { return a.case_id < b.case_id; });
  } else {
    rest = candidates;
  }
  seeded_shuffle(rest, rng);
  for (std::size_t i = 0; chosen.size() < n_cases; ++i) {
    chosen.push_back(rest[i]);
  }
  std::sort(chosen.begin(), chosen.end(), [](const StudyCase &a, const StudyCase &b) { return a.case_id < b.case_id; });

  StudyPlan plan;
  plan.track = track;
  plan.seed = seed;
  plan.finalists = finalists;
  plan.cases = chosen;
  for (std::size_t r = 0; r < n_readers; ++r) {
    plan.readers.push_back(reader_id(r));
  }
  plan.labels.resize(chosen.size());
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    for (const auto &rid : plan.readers) {
      std::vector<std::size_t> perm(finalists.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      SplitMix64 lr(derive_seed(seed, "labels:" + track + ":" + chosen[c].case_id + ":" + rid));
      seeded_shuffle(perm, lr);
      plan.labels[c].push_back(perm);
    }
  }
  return plan;
}

// ---- responses ---------------------------------------------------------------------

Json ReaderResponse::to_json() const
{
  return {{"reader_id", reader_id}, {"track", track}, {"case_id", case_id}, {"ranks", ranks}, {"scores", scores}};
}

ReaderResponse ReaderResponse::from_json(const Json &j)
{
  ReaderResponse r;
  try {
    r.reader_id = j.at("reader_id").get<std::string>();
    r.track = j.at("track").get<std::string>();
    r.case_id = j.at("case_id").get<std::string>();
    r.ranks = j.at("ranks").get<std::map<std::string, int>>();
    r.scores = j.value("scores", std::map<std::string, std::map<std::string, int>>{});
  } catch (const Json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed response: ") + e.what());
  }
  return r;
}

Json UnblindedResponse::to_json() const
{
  return {{"reader_id", reader_id}, {"case_id", case_id}, {"ranks", ranks}, {"scores", scores}};
}

UnblindedResponse UnblindedResponse::from_json(const Json &j)
{
  UnblindedResponse r;
  r.reader_id = j.at("reader_id").get<std::string>();
  r.case_id = j.at("case_id").get<std::string>();
  r.ranks = j.at("ranks").get<std::map<std::string, int>>();
  r.scores = j.value("scores", std::map<std::string, std::map<std::string, int>>{});
  return r;
}

UnblindedResponse validate_response(const ReaderResponse &resp, const StudyPlan &plan)
{
  if (resp.track != plan.track) {
    throw Error(ErrorCode::InvalidArgument, "response is for track '" + resp.track + "', study is '" + plan.track + "'");
  }
  std::size_t const ci = plan.case_index(resp.case_id);
  std::size_t const ri = plan.reader_index(resp.reader_id);
  auto const names = plan.label_names();
  int const k = static_cast<int>(names.size());

  std::vector<int> seen(static_cast<std::size_t>(k) + 1, 0);
  for (const auto &[label, rank] : resp.ranks) {
    if (std::find(names.begin(), names.end(), label) == names.end()) {
      throw Error(ErrorCode::InvalidPermutation, "unknown label '" + label + "' in ranking");
    }
    if (rank < 1 || rank > k || seen[static_cast<std::size_t>(rank)]++) {
      throw Error(ErrorCode::InvalidPermutation, fmt::format("ranks must be a permutation of 1..{}", k));
    }
  }
  if (resp.ranks.size() != names.size()) {
    throw Error(ErrorCode::InvalidPermutation, fmt::format("ranks must be a permutation of 1..{}", k));
  }

  for (const auto &[label, crit] : resp.scores) {
    if (std::find(names.begin(), names.end(), label) == names.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown label '" + label + "' in scores");
    }
    for (const auto &[name, v] : crit) {
      if (std::find(kCriteria.begin(), kCriteria.end(), name) == kCriteria.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + name + "'");
      }
    }
  }
  for (const auto &label : names) {
    auto it = resp.scores.find(label);
    for (const auto &name : kCriteria) {
      if (it == resp.scores.end() || !it->second.count(name)) {
        throw Error(ErrorCode::IncompleteResponse, "missing " + name + " for " + label);
      }
      int const v = it->second.at(name);
      if (v < kScaleMin || v > kScaleMax) {
        throw Error(ErrorCode::OutOfScale, fmt::format("{} for {} is {}, outside {}..{}", name, label, v, kScaleMin,
                                                       kScaleMax));
      }
    }
  }

  UnblindedResponse out;
  out.reader_id = resp.reader_id;
  out.case_id = resp.case_id;
  for (const auto &label : names) {
    const std::string &team = plan.finalists[plan.unblind(ci, ri, label)].team_id;
    out.ranks[team] = resp.ranks.at(label);
    out.scores[team] = resp.scores.at(label);
  }
  return out;
}

// ---- aggregation ---------------------------------------------------------------------

namespace {

// Checks the response grid and returns the team list.
std::vector<std::string> check_complete(const std::vector<UnblindedResponse> &responses, std::size_t n_readers)
{
  if (responses.empty()) {
    throw Error(ErrorCode::IncompleteStudy, "no responses");
  }
  std::set<std::string> teams;
  for (const auto &[t, r] : responses.front().ranks) {
    teams.insert(t);
  }
  std::map<std::string, std::set<std::string>> cases_by_reader;
  for (const auto &r : responses) {
    std::set<std::string> t;
    for (const auto &[team, rank] : r.ranks) {
      t.insert(team);
    }
    if (t != teams) {
      throw Error(ErrorCode::IncompleteStudy, "responses rank different team sets");
    }
    if (!cases_by_reader[r.reader_id].insert(r.case_id).second) {
      throw Error(ErrorCode::IncompleteStudy, "duplicate response from " + r.reader_id + " for " + r.case_id);
    }
  }
  if (cases_by_reader.size() != n_readers) {
    throw Error(ErrorCode::IncompleteStudy,
                fmt::format("{} of {} readers responded", cases_by_reader.size(), n_readers));
  }
  const auto &first = cases_by_reader.begin()->second;
  for (const auto &[reader, cases] : cases_by_reader) {
    if (cases != first) {
      throw Error(ErrorCode::IncompleteStudy, reader + " did not read the same cases as the others");
    }
  }
  return {teams.begin(), teams.end()};
}

} // namespace

std::map<std::string, std::map<std::string, Rational>>
aggregate_criteria(const std::vector<UnblindedResponse> &responses, std::size_t n_readers)
{
  auto const teams = check_complete(responses, n_readers);
  std::map<std::string, std::map<std::string, Rational>> out;
  for (const auto &t : teams) {
    for (const auto &c : kCriteria) {
      Rational sum{0, 0};
      for (const auto &r : responses) {
        auto it = r.scores.find(t);
        if (it == r.scores.end() || !it->second.count(c)) {
          throw Error(ErrorCode::IncompleteStudy, "missing " + c + " score for " + t);
        }
        sum.num += it->second.at(c);
        ++sum.den;
      }
      out[t][c] = sum;
    }
  }
  return out;
}

const TeamStanding &StudyResult::team(const std::string &id) const
{
  for (const auto &t : teams) {
    if (t.team_id == id) {
      return t;
    }
  }
  throw Error(ErrorCode::NotFound, "team '" + id + "' not in study result");
}

std::string TeamStanding::rank_label() const
{
  return tied ? fmt::format("{} (tie)", final_rank) : std::to_string(final_rank);
}

StudyResult aggregate_ranks(const std::vector<UnblindedResponse> &responses, std::size_t n_readers)
{
  auto const teams = check_complete(responses, n_readers);
  bool const have_scores = std::all_of(responses.begin(), responses.end(),
                                       [](const UnblindedResponse &r) { return !r.scores.empty(); });
  std::map<std::string, std::map<std::string, Rational>> criteria;
  if (have_scores) {
    criteria = aggregate_criteria(responses, n_readers);
  }
  StudyResult res;
  res.responses = responses;
  std::sort(res.responses.begin(), res.responses.end(), [](const UnblindedResponse &a, const UnblindedResponse &b) {
    return std::tie(a.reader_id, a.case_id) < std::tie(b.reader_id, b.case_id);
  });
  for (const auto &t : teams) {
    TeamStanding s;
    s.team_id = t;
    s.avg_rank = {0, 0};
    for (const auto &r : responses) {
      s.avg_rank.num += r.ranks.at(t);
      ++s.avg_rank.den;
      auto [it, fresh] = res.per_reader[r.reader_id].try_emplace(t, Rational{0, 0});
      it->second.num += r.ranks.at(t);
      ++it->second.den;
    }
    if (have_scores) {
      s.criteria = criteria.at(t);
    }
    res.teams.push_back(s);
  }
  for (auto &s : res.teams) {
    std::size_t better = 0, equal = 0;
    for (const auto &o : res.teams) {
      int const c = o.avg_rank.compare(s.avg_rank);
      better += c < 0;
      equal += c == 0;
    }
    s.final_rank = better + 1;
    s.tied = equal > 1;
  }
  std::sort(res.teams.begin(), res.teams.end(), [](const TeamStanding &a, const TeamStanding &b) {
    return std::tie(a.final_rank, a.team_id) < std::tie(b.final_rank, b.team_id);
  });
  return res;
}

Json StudyResult::to_json() const
{
  Json t = Json::array();
  for (const auto &s : teams) {
    Json crit = Json::object();
    for (const auto &[c, v] : s.criteria) {
      crit[c] = {{"mean", v.text3()}, {"sum", v.num}, {"count", v.den}};
    }
    t.push_back({{"team_id", s.team_id},
                 {"avg_rank", s.avg_rank.text3()},
                 {"rank_sum", s.avg_rank.num},
                 {"votes", s.avg_rank.den},
                 {"final_rank", s.final_rank},
                 {"rank_label", s.rank_label()},
                 {"criteria", crit}});
  }
  Json pr = Json::object();
  for (const auto &[reader, m] : per_reader) {
    for (const auto &[team, v] : m) {
      pr[reader][team] = v.text3();
    }
  }
  Json resp = Json::array();
  for (const auto &r : responses) {
    resp.push_back(r.to_json());
  }
  return {{"track", track}, {"teams", t}, {"per_reader", pr}, {"responses", resp}};
}

std::string StudyResult::to_csv() const
{
  std::ostringstream out;
  out << "track,team_id,final_rank,rank_label,avg_rank";
  for (const auto &c : kCriteria) {
    out << ',' << c;
  }
  out << '\n';
  for (const auto &s : teams) {
    out << track << ',' << '"' << s.team_id << '"' << ',' << s.final_rank << ',' << s.rank_label() << ','
        << s.avg_rank.text3();
    for (const auto &c : kCriteria) {
      auto it = s.criteria.find(c);
      out << ',' << (it == s.criteria.end() ? std::string() : it->second.text3());
    }
    out << '\n';
  }
  return out.str();
}

// ---- normalisation ---------------------------------------------------------------------

std::vector<double> normalize_higher(const std::vector<double> &values)
{
  if (values.empty()) {
    return {};
  }
  double const mx = *std::max_element(values.begin(), values.end());
  if (!(mx > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "higher-is-better normalisation needs a positive maximum");
  }
  std::vector<double> out;
  for (double v : values) {
    out.push_back(v / mx);
  }
  return out;
}

std::vector<double> normalize_lower(const std::vector<double> &values, bool *capped)
{
  bool cap = false;
  std::vector<double> floored;
  for (double v : values) {
    if (v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "lower-is-better values must be >= 0");
    }
    cap |= v < kNmseFloor;
    floored.push_back(std::max(v, kNmseFloor));
  }
  if (capped) {
    *capped = cap;
  }
  if (floored.empty()) {
    return {};
  }
  double const mn = *std::min_element(floored.begin(), floored.end());
  std::vector<double> out;
  for (double v : floored) {
    out.push_back(mn / v);
  }
  return out;
}

std::vector<ScatterRow> normalize_for_scatter(const std::vector<TeamMetrics> &metrics, const StudyResult &study)
{
  std::vector<double> ssim, psnr, nmse;
  for (const auto &m : metrics) {
    ssim.push_back(m.ssim);
    psnr.push_back(m.psnr);
    nmse.push_back(m.nmse);
  }
  bool capped = false;
  auto const ns = normalize_higher(ssim);
  auto const np = normalize_higher(psnr);
  auto const nn = normalize_lower(nmse, &capped);
  std::vector<ScatterRow> rows;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    double const avg = study.team(metrics[i].team_id).avg_rank.value();
    rows.push_back({"nmse", metrics[i].team_id, nmse[i], nn[i], avg, capped});
    rows.push_back({"psnr", metrics[i].team_id, psnr[i], np[i], avg, false});
    rows.push_back({"ssim", metrics[i].team_id, ssim[i], ns[i], avg, false});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScatterRow &a, const ScatterRow &b) { return a.metric < b.metric; });
  return rows;
}

std::string scatter_csv(const std::vector<ScatterRow> &rows)
{
  std::string out = "metric,team_id,raw,normalized,avg_rank,capped\n";
  for (const auto &r : rows) {
    out += fmt::format("{},\"{}\",{:.6g},{:.5f},{:.3f},{}\n", r.metric, r.team_id, r.raw, r.normalized, r.avg_rank,
                       r.capped ? 1 : 0);
  }
  return out;
}

} // namespace mrb
