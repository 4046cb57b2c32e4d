#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "mrbench/rng.hpp"
#include "mrbench/study.hpp"
#include "mrbench/study_fixture.hpp"
#include "test_util.hpp"

using namespace mrb;
using mrb::test::expect_code;

namespace {

std::vector<UnblindedResponse> votes(const std::map<std::string, std::vector<int>> &ranks)
{
  std::size_t const n = ranks.begin()->second.size();
  std::vector<UnblindedResponse> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[r].reader_id = reader_id(r);
    out[r].case_id = "c0";
    for (const auto &[team, v] : ranks) {
      out[r].ranks[team] = v[r];
    }
  }
  return out;
}

std::vector<StudyCase> candidates(int n_pd, int n_fs)
{
  std::vector<StudyCase> c;
  for (int i = 0; i < n_pd; ++i) {
    c.push_back({"pd_" + std::to_string(i), Contrast::PD});
  }
  for (int i = 0; i < n_fs; ++i) {
    c.push_back({"fs_" + std::to_string(i), Contrast::PDFS});
  }
  return c;
}

std::vector<Finalist> four()
{
  return {{"t0", "s0"}, {"t1", "s1"}, {"t2", "s2"}, {"t3", "s3"}};
}

ReaderResponse full_response(const StudyPlan &plan, std::size_t ci, std::size_t ri)
{
  ReaderResponse r;
  r.reader_id = plan.readers[ri];
  r.track = plan.track;
  r.case_id = plan.cases[ci].case_id;
  int k = 1;
  for (const auto &l : plan.label_names()) {
    r.ranks[l] = k;
    for (const auto &c : kCriteria) {
      r.scores[l][c] = k;
    }
    ++k;
  }
  return r;
}

} // namespace

TEST_CASE("rational display")
{
  CHECK(Rational{9, 7}.text3() == "1.286");
  CHECK(Rational{22, 7}.text3() == "3.143");
  CHECK(Rational{19, 7}.text3() == "2.714");
  CHECK(Rational{16, 7}.text3() == "2.286");
  CHECK(Rational{7, 7}.text3() == "1.000");
  CHECK(Rational{1, 8}.text3() == "0.125");
  CHECK(Rational{1, 2000}.text3() == "0.001"); // half goes up
  CHECK(Rational{-9, 7}.text3() == "-1.286");
  CHECK(Rational{16, 7} == Rational{32, 14});
  CHECK(Rational{16, 7}.compare(Rational{19, 7}) < 0);

  SUBCASE("matches a decimal-string oracle")
  {
    // Long division to four places, then round the fourth digit.
    for (long long den = 1; den <= 40; ++den) {
      for (long long num = 0; num <= 5 * den; ++num) {
        long long whole = num / den, rem = num % den;
        std::string digits;
        for (int i = 0; i < 4; ++i) {
          rem *= 10;
          digits += static_cast<char>('0' + rem / den);
          rem %= den;
        }
        bool const up = digits[3] >= '5';
        long long milli = whole * 1000 + std::stoll(digits.substr(0, 3)) + (up ? 1 : 0);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld.%03lld", milli / 1000, milli % 1000);
        CHECK(Rational{num, den}.text3() == buf);
      }
    }
  }
}

TEST_CASE("rank aggregation arithmetic")
{
  auto res = aggregate_ranks(votes({{"P", {1, 1, 1, 1, 1, 2, 2}},
                                    {"H", {2, 2, 4, 4, 4, 1, 1}},
                                    {"M", {3, 4, 2, 2, 2, 4, 4}},
                                    {"A", {4, 3, 3, 3, 3, 3, 3}}}));
  CHECK(res.team("P").avg_rank == Rational{9, 7});
  CHECK(res.team("P").avg_rank.text3() == "1.286");
  CHECK(res.team("A").avg_rank.text3() == "3.143");
  CHECK(res.team("P").rank_label() == "1");
  CHECK(res.teams[0].team_id == "P");
  CHECK(res.teams[3].team_id == "A");

  SUBCASE("exact ties share a rank")
  {
    auto tied = aggregate_ranks(votes({{"X", {4, 2, 3, 1, 1, 2, 3}},
                                       {"Y", {2, 4, 2, 2, 3, 1, 2}},
                                       {"Z", {3, 3, 4, 3, 2, 3, 1}},
                                       {"W", {1, 1, 1, 4, 4, 4, 4}}}));
    CHECK(tied.team("X").avg_rank == Rational{16, 7});
    CHECK(tied.team("Y").avg_rank == Rational{16, 7});
    CHECK(tied.team("X").rank_label() == "1 (tie)");
    CHECK(tied.team("Y").rank_label() == "1 (tie)");
    CHECK(tied.team("Z").rank_label() == "3 (tie)");
    CHECK(tied.team("W").rank_label() == "3 (tie)");
    CHECK(tied.team("Z").avg_rank.text3() == "2.714");
  }
  SUBCASE("near ties are not ties")
  {
    // 1/3 vs 333/1000 differ in the rationals even though floats are close.
    auto r = aggregate_ranks(votes({{"a", {1, 2, 1}}, {"b", {2, 1, 2}}}), 3);
    CHECK_FALSE(r.team("a").tied);
    CHECK(r.team("a").final_rank == 1);
  }
  SUBCASE("missing reader")
  {
    auto v = votes({{"a", {1, 2, 1, 2, 1, 2, 1}}, {"b", {2, 1, 2, 1, 2, 1, 2}}});
    v.pop_back();
    expect_code(ErrorCode::IncompleteStudy, [&] { aggregate_ranks(v); });
    auto dup = votes({{"a", {1, 2, 1, 2, 1, 2, 1}}, {"b", {2, 1, 2, 1, 2, 1, 2}}});
    dup[6].reader_id = dup[5].reader_id;
    expect_code(ErrorCode::IncompleteStudy, [&] { aggregate_ranks(dup); });
    expect_code(ErrorCode::IncompleteStudy, [] { aggregate_ranks({}); });
  }
}

TEST_CASE("aggregation invariances")
{
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<UnblindedResponse> v(7);
    for (std::size_t r = 0; r < 7; ++r) {
      std::vector<int> perm = {1, 2, 3, 4};
      seeded_shuffle(perm, rng);
      v[r].reader_id = reader_id(r);
      v[r].case_id = "c";
      for (int t = 0; t < 4; ++t) {
        v[r].ranks["t" + std::to_string(t)] = perm[static_cast<std::size_t>(t)];
      }
    }
    auto const base = aggregate_ranks(v);
    auto shuffled = v;
    seeded_shuffle(shuffled, rng);
    CHECK(aggregate_ranks(shuffled).to_json() == base.to_json());

    // Relabel teams t_i -> u_{3-i}.
    auto relabeled = v;
    for (auto &r : relabeled) {
      std::map<std::string, int> m;
      for (const auto &[t, k] : r.ranks) {
        m["u" + std::to_string(3 - (t[1] - '0'))] = k;
      }
      r.ranks = m;
    }
    auto const rr = aggregate_ranks(relabeled);
    for (int t = 0; t < 4; ++t) {
      const auto &a = base.team("t" + std::to_string(t));
      const auto &b = rr.team("u" + std::to_string(3 - t));
      CHECK(a.avg_rank == b.avg_rank);
      CHECK(a.final_rank == b.final_rank);
      CHECK(a.tied == b.tied);
    }
    // Avg ranks of four teams always sum to 10.
    Rational sum{0, 7};
    for (const auto &s : base.teams) {
      sum.num += s.avg_rank.num;
    }
    CHECK(sum == Rational{70, 7});
  }
}

TEST_CASE("criterion means")
{
  std::vector<UnblindedResponse> v(7);
  std::vector<int> const artifacts = {2, 3, 3, 3, 3, 3, 2};
  for (std::size_t r = 0; r < 7; ++r) {
    v[r].reader_id = reader_id(r);
    v[r].case_id = "c";
    v[r].ranks = {{"P", 1}, {"Q", 2}};
    v[r].scores["P"] = {{"artifacts", artifacts[r]}, {"sharpness", 1}, {"cnr", 1}, {"diagnostic_confidence", 1}};
    v[r].scores["Q"] = {{"artifacts", 1}, {"sharpness", 1}, {"cnr", 1}, {"diagnostic_confidence", 1}};
  }
  auto const m = aggregate_criteria(v);
  CHECK(m.at("P").at("artifacts") == Rational{19, 7});
  CHECK(m.at("P").at("artifacts").text3() == "2.714");
  CHECK(m.at("Q").at("artifacts").text3() == "1.000");
  // Criterion scores never move the final ranking.
  auto res = aggregate_ranks(v);
  CHECK(res.team("P").final_rank == 1);
  CHECK(res.team("P").criteria.at("artifacts") == Rational{19, 7});
  v[0].scores["P"].erase("cnr");
  expect_code(ErrorCode::IncompleteStudy, [&] { aggregate_criteria(v); });
}

TEST_CASE("reference fixture")
{
  std::map<std::string, std::map<std::string, std::string>> const avg = {
      {"mc_r4", {{"Philips & LUMC", "2.286"}, {"MSDC-RNN", "2.286"}, {"holykspace", "2.714"}, {"AM", "2.714"}}},
      {"mc_r8", {{"Philips & LUMC", "1.286"}, {"holykspace", "2.571"}, {"AM", "3.000"}, {"AImsterdam", "3.143"}}},
      {"sc_r4", {{"AImsterdam", "1.286"}, {"JG", "2.571"}, {"Philips & LUMC", "2.714"}, {"Samoyed", "3.429"}}}};
  std::map<std::string, std::map<std::string, std::string>> const label = {
      {"mc_r4", {{"Philips & LUMC", "1 (tie)"}, {"MSDC-RNN", "1 (tie)"}, {"holykspace", "3 (tie)"}, {"AM", "3 (tie)"}}},
      {"mc_r8", {{"Philips & LUMC", "1"}, {"holykspace", "2"}, {"AM", "3"}, {"AImsterdam", "4"}}},
      {"sc_r4", {{"AImsterdam", "1"}, {"JG", "2"}, {"Philips & LUMC", "3"}, {"Samoyed", "4"}}}};
  // Published criterion means, in kCriteria order.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> const crit = {
      {"mc_r4",
       {{"Philips & LUMC", {"2.714", "2.286", "2.286", "2.000"}},
        {"MSDC-RNN", {"2.571", "2.286", "2.429", "1.857"}},
        {"holykspace", {"2.000", "3.000", "2.714", "1.857"}},
        {"AM", {"2.000", "3.000", "2.000", "2.000"}}}},
      {"mc_r8",
       {{"Philips & LUMC", {"1.714", "2.286", "2.286", "2.286"}},
        {"holykspace", {"2.143", "3.143", "2.286", "2.857"}},
        {"AM", {"1.857", "3.286", "2.429", "3.143"}},
        {"AImsterdam", {"2.714", "2.857", "3.000", "3.143"}}}},
      {"sc_r4",
       {{"AImsterdam", {"2.429", "2.286", "2.143", "2.286"}},
        {"JG", {"3.000", "2.714", "2.429", "2.571"}},
        {"Philips & LUMC", {"2.714", "3.000", "2.714", "2.857"}},
        {"Samoyed", {"3.143", "3.286", "3.000", "3.286"}}}}};

  for (const auto &track : fixture_tracks()) {
    INFO(track);
    auto const resp = fixture_responses(track);
    // Every reader's ranks are a permutation and every score is on scale.
    for (const auto &r : resp) {
      std::set<int> seen;
      for (const auto &[t, k] : r.ranks) {
        seen.insert(k);
      }
      CHECK(seen == std::set<int>{1, 2, 3, 4});
      for (const auto &[t, m] : r.scores) {
        for (const auto &[c, s] : m) {
          CHECK(s >= kScaleMin);
          CHECK(s <= kScaleMax);
        }
      }
    }
    auto const res = aggregate_ranks(resp);
    for (const auto &s : res.teams) {
      CHECK(s.avg_rank.text3() == avg.at(track).at(s.team_id));
      CHECK(s.rank_label() == label.at(track).at(s.team_id));
      for (std::size_t c = 0; c < kCriteria.size(); ++c) {
        CHECK(s.criteria.at(kCriteria[c]).text3() == crit.at(track).at(s.team_id)[c]);
      }
    }
  }
  // The artifacts votes for the top mc_r4 team are exactly {2,3,3,3,3,3,2}.
  auto const r4 = fixture_responses("mc_r4");
  std::vector<int> a;
  for (const auto &r : r4) {
    a.push_back(r.scores.at("Philips & LUMC").at("artifacts"));
  }
  CHECK(a == std::vector<int>{2, 3, 3, 3, 3, 3, 2});
  expect_code(ErrorCode::InvalidArgument, [] { fixture_teams("mc_r2"); });
}

TEST_CASE("consistency of ranks and criterion scores")
{
  // Readers rank strictly by their own criterion totals; a team that every
  // reader puts first then has the (weakly) lowest sum of criterion means.
  SplitMix64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<UnblindedResponse> v(7);
    for (std::size_t r = 0; r < 7; ++r) {
      v[r].reader_id = reader_id(r);
      v[r].case_id = "c";
      std::vector<std::pair<int, int>> totals; // (total, team)
      for (int t = 0; t < 4; ++t) {
        int total = 0;
        for (const auto &c : kCriteria) {
          int const s = 1 + static_cast<int>(rng.below(t == 0 ? 2 : 4));
          v[r].scores["t" + std::to_string(t)][c] = s;
          total += s;
        }
        totals.push_back({total, t});
      }
      std::vector<int> order = {0, 1, 2, 3};
      seeded_shuffle(order, rng); // random tie-break
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return totals[static_cast<std::size_t>(a)].first < totals[static_cast<std::size_t>(b)].first;
      });
      for (int k = 0; k < 4; ++k) {
        v[r].ranks["t" + std::to_string(order[static_cast<std::size_t>(k)])] = k + 1;
      }
    }
    auto const res = aggregate_ranks(v);
    for (const auto &s : res.teams) {
      bool const unanimous = std::all_of(v.begin(), v.end(), [&](const UnblindedResponse &r) {
        return r.ranks.at(s.team_id) == 1;
      });
      if (!unanimous) {
        continue;
      }
      ++checked;
      auto total = [](const TeamStanding &t) {
        double x = 0.0;
        for (const auto &[c, m] : t.criteria) {
          x += m.value();
        }
        return x;
      };
      for (const auto &o : res.teams) {
        CHECK(total(s) <= total(o) + 1e-12);
      }
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("scatter normalisation")
{
  auto const n = normalize_higher({0.901, 0.899, 0.901, 0.898});
  std::vector<double> const want = {1.0, 0.99778, 1.0, 0.99667};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(n[i] - want[i]) <= 1e-5);
  }
  CHECK(normalize_higher({0.5}) == std::vector<double>{1.0});
  CHECK(normalize_lower({0.25}) == std::vector<double>{1.0});
  auto const lo = normalize_lower({0.02, 0.01, 0.04});
  CHECK(lo[1] == 1.0);
  CHECK(lo[0] == doctest::Approx(0.5));
  CHECK(lo[2] == doctest::Approx(0.25));

  bool capped = false;
  auto const z = normalize_lower({0.0, 0.01}, &capped);
  CHECK(capped);
  CHECK(z[0] == 1.0);
  CHECK(z[1] == doctest::Approx(kNmseFloor / 0.01));
  normalize_lower({0.1, 0.2}, &capped);
  CHECK_FALSE(capped);
  expect_code(ErrorCode::InvalidArgument, [] { normalize_lower({-1.0}); });
  expect_code(ErrorCode::InvalidArgument, [] { normalize_higher({0.0, 0.0}); });

  auto const study = aggregate_ranks(fixture_responses("mc_r8"));
  auto const rows = normalize_for_scatter(fixture_metrics("mc_r8"), study);
  CHECK(rows.size() == 12);
  for (const auto &metric : {"nmse", "psnr", "ssim"}) {
    double best = 0.0;
    for (const auto &r : rows) {
      if (r.metric == metric) {
        best = std::max(best, r.normalized);
      }
    }
    CHECK(best == 1.0);
  }
  auto const csv = scatter_csv(rows);
  CHECK(csv.rfind("metric,team_id,raw,normalized,avg_rank,capped\n", 0) == 0);
  CHECK(csv.find("ssim,\"holykspace\",0.899,0.99778,2.571,0") != std::string::npos);
}

TEST_CASE("study plan")
{
  auto const plan = build_study_plan("mc_r8", four(), candidates(6, 5), 5, 7, 42);
  CHECK(plan.cases.size() == 5);
  CHECK(plan.readers.size() == 7);
  CHECK(plan.label_names() == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(build_study_plan("mc_r8", four(), candidates(6, 5), 5, 7, 42).to_json() == plan.to_json());
  CHECK(StudyPlan::from_json(plan.to_json()).to_json() == plan.to_json());
  CHECK(build_study_plan("mc_r8", four(), candidates(6, 5), 5, 7, 43).to_json() != plan.to_json());

  // Candidate order does not matter.
  auto rev = candidates(6, 5);
  std::reverse(rev.begin(), rev.end());
  CHECK(build_study_plan("mc_r8", four(), rev, 5, 7, 42).to_json() == plan.to_json());

  SUBCASE("both contrasts in every sample")
  {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto p = build_study_plan("sc_r4", four(), candidates(30, 1), 5, 7, seed);
      int pd = 0, fs = 0;
      std::set<std::string> ids;
      for (const auto &c : p.cases) {
        (c.contrast == Contrast::PD ? pd : fs)++;
        ids.insert(c.case_id);
      }
      CHECK(pd >= 1);
      CHECK(fs == 1);
      CHECK(ids.size() == 5);
    }
    CHECK(build_study_plan("sc_r4", four(), candidates(3, 0), 1, 7, 1).cases.size() == 1);
    expect_code(ErrorCode::StudyInfeasible, [] { build_study_plan("sc_r4", four(), candidates(4, 0), 2, 7, 1); });
    expect_code(ErrorCode::StudyInfeasible, [] { build_study_plan("sc_r4", four(), candidates(2, 2), 5, 7, 1); });
  }
  SUBCASE("blinding round trip")
  {
    for (std::size_t c = 0; c < plan.cases.size(); ++c) {
      for (std::size_t r = 0; r < plan.readers.size(); ++r) {
        for (std::size_t f = 0; f < 4; ++f) {
          CHECK(plan.unblind(c, r, plan.blind(c, r, f)) == f);
        }
      }
    }
  }
  SUBCASE("labels differ across readers")
  {
    // For a fixed case, two readers share the same label order with
    // probability 1/24; over many seeds the observed rate of differing
    // pairs must stay above 0.9.
    std::size_t differ = 0, pairs = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      auto p = build_study_plan("mc_r4", four(), candidates(3, 3), 2, 7, seed);
      for (std::size_t c = 0; c < p.cases.size(); ++c) {
        for (std::size_t a = 0; a < 7; ++a) {
          for (std::size_t b = a + 1; b < 7; ++b) {
            differ += p.labels[c][a] != p.labels[c][b];
            ++pairs;
          }
        }
      }
    }
    double const rate = static_cast<double>(differ) / static_cast<double>(pairs);
    CHECK(rate > 0.9);
    CHECK(rate < 0.99); // not suspiciously never equal
  }
  expect_code(ErrorCode::InvalidArgument, [] { build_study_plan("x", {}, candidates(3, 3), 2, 7, 1); });
}

TEST_CASE("response validation")
{
  auto const plan = build_study_plan("mc_r8", four(), candidates(3, 3), 5, 7, 9);
  auto const good = full_response(plan, 2, 4);
  auto const u = validate_response(good, plan);
  for (const auto &[label, rank] : good.ranks) {
    std::size_t const f = plan.unblind(2, 4, label);
    CHECK(u.ranks.at(plan.finalists[f].team_id) == rank);
    CHECK(u.scores.at(plan.finalists[f].team_id).at("cnr") == rank);
  }
  CHECK(ReaderResponse::from_json(good.to_json()).to_json() == good.to_json());

  auto bad = good;
  bad.ranks = {{"A", 1}, {"B", 2}, {"C", 2}, {"D", 4}};
  expect_code(ErrorCode::InvalidPermutation, [&] { validate_response(bad, plan); });
  bad.ranks = {{"A", 1}, {"B", 2}, {"C", 3}};
  expect_code(ErrorCode::InvalidPermutation, [&] { validate_response(bad, plan); });
  bad.ranks = {{"A", 1}, {"B", 2}, {"C", 3}, {"E", 4}};
  expect_code(ErrorCode::InvalidPermutation, [&] { validate_response(bad, plan); });
  bad.ranks = {{"A", 0}, {"B", 2}, {"C", 3}, {"D", 4}};
  expect_code(ErrorCode::InvalidPermutation, [&] { validate_response(bad, plan); });

  bad = good;
  bad.scores["B"].erase("sharpness");
  expect_code(ErrorCode::IncompleteResponse, [&] { validate_response(bad, plan); });
  bad = good;
  bad.scores.erase("D");
  expect_code(ErrorCode::IncompleteResponse, [&] { validate_response(bad, plan); });
  bad = good;
  bad.scores["A"]["artifacts"] = 5;
  expect_code(ErrorCode::OutOfScale, [&] { validate_response(bad, plan); });
  bad.scores["A"]["artifacts"] = 0;
  expect_code(ErrorCode::OutOfScale, [&] { validate_response(bad, plan); });

  bad = good;
  bad.track = "sc_r4";
  expect_code(ErrorCode::InvalidArgument, [&] { validate_response(bad, plan); });
  bad = good;
  bad.reader_id = "reader_8";
  expect_code(ErrorCode::InvalidArgument, [&] { validate_response(bad, plan); });
  bad = good;
  bad.case_id = "nope";
  expect_code(ErrorCode::InvalidArgument, [&] { validate_response(bad, plan); });
  expect_code(ErrorCode::InvalidArgument, [] { ReaderResponse::from_json(Json{{"reader_id", 3}}); });

  SUBCASE("a full study aggregates")
  {
    std::vector<UnblindedResponse> all;
    for (std::size_t c = 0; c < plan.cases.size(); ++c) {
      for (std::size_t r = 0; r < plan.readers.size(); ++r) {
        all.push_back(validate_response(full_response(plan, c, r), plan));
      }
    }
    auto const res = aggregate_ranks(all);
    CHECK(res.responses.size() == 35);
    Rational sum{0, 35};
    for (const auto &t : res.teams) {
      CHECK(t.avg_rank.den == 35);
      sum.num += t.avg_rank.num;
      CHECK(t.criteria.at("sharpness") == t.avg_rank);
    }
    CHECK(sum == Rational{10, 1});
    CHECK(res.per_reader.size() == 7);
    CHECK(res.to_csv().rfind("track,team_id,final_rank,rank_label,avg_rank,artifacts", 0) == 0);
    // One case missing for one reader.
    all.pop_back();
    expect_code(ErrorCode::IncompleteStudy, [&] { aggregate_ranks(all); });
  }
}
