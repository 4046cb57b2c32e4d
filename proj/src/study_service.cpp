#include "mrbench/study_service.hpp"

#include <set>

#include <fmt/format.h>

#include "mrbench/container.hpp"
#include "mrbench/error.hpp"
#include "mrbench/pipeline.hpp"
#include "mrbench/render.hpp"

namespace mrb {

namespace {

const std::map<std::string, MagnitudeVolume> &challenge_refs(const ReferenceSet &refs, const StudyTrack &st)
{
  auto it = refs.find(split_for(Phase::Challenge, st.track));
  if (it == refs.end()) {
    throw Error(ErrorCode::NotFound, "no challenge references for " + st.track);
  }
  return it->second;
}

} // namespace

std::filesystem::path study_plan_path(const std::filesystem::path &root, const std::string &study_track)
{
  (void)mrb::study_track(study_track);
  return root / "study" / study_track / "plan.json";
}

StudyPlan load_study_plan(const std::filesystem::path &root, const std::string &study_track)
{
  auto const p = study_plan_path(root, study_track);
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorCode::NotFound, "no study plan for " + study_track);
  }
  return StudyPlan::from_json(read_json(p));
}

StudyPlan make_study_plan(const LeaderboardState &state, const ReferenceSet &refs, const std::string &name,
                          const StudyConfig &cfg, std::uint64_t seed)
{
  StudyTrack const st = study_track(name);
  auto const sel = state.select_finalists(st.track, cfg.finalists, st.accel);
  if (sel.tie_at_cutoff) {
    std::string teams;
    for (const auto &c : sel.finalists) {
      teams += (teams.empty() ? "" : ", ") + c.team_id;
    }
    throw Error(ErrorCode::StudyInfeasible,
                fmt::format("tie at finalist cutoff for {} ({}); organisers must decide", name, teams));
  }
  std::vector<Finalist> finalists;
  for (const auto &c : sel.finalists) {
    finalists.push_back({c.team_id, c.submission_id});
  }
  std::vector<StudyCase> candidates;
  for (const auto &[id, v] : challenge_refs(refs, st)) {
    candidates.push_back({id, v.attrs.contrast});
  }
  return build_study_plan(name, finalists, candidates, cfg.n_cases, cfg.n_readers, seed);
}

Json reader_bundle(const StudyPlan &plan, const ReferenceSet &refs, const LeaderboardState &state,
                   const std::string &reader_id)
{
  plan.reader_index(reader_id);
  StudyTrack const st = study_track(plan.track);
  const auto &gt = challenge_refs(refs, st);
  std::set<std::string> answered;
  for (const auto &r : state.study_responses(plan.track)) {
    if (r.reader_id == reader_id) {
      answered.insert(r.case_id);
    }
  }
  Json cases = Json::array();
  auto labels = plan.label_names();
  labels.insert(labels.begin(), "GT");
  for (const auto &c : plan.cases) {
    std::size_t const ns = gt.at(c.case_id).nslices;
    Json images = Json::object();
    for (const auto &l : labels) {
      Json urls = Json::array();
      for (std::size_t s = 0; s < ns; ++s) {
        urls.push_back(fmt::format("/api/study/{}/images/{}/{}/{}.png", plan.track, c.case_id, l, s));
      }
      images[l] = urls;
    }
    cases.push_back({{"case_id", c.case_id},
                     {"contrast", to_string(c.contrast)},
                     {"nslices", ns},
                     {"answered", answered.count(c.case_id) > 0},
                     {"images", images}});
  }
  return {{"track", plan.track},
          {"reader_id", reader_id},
          {"labels", plan.label_names()},
          {"criteria", kCriteria},
          {"scale", {{"min", kScaleMin}, {"max", kScaleMax}, {"best", kScaleMin}}},
          {"cases", cases}};
}

MagnitudeVolume study_volume(const StudyPlan &plan, const std::filesystem::path &root, const ReferenceSet &refs,
                             const std::string &case_id, const std::string &reader_id, const std::string &label)
{
  StudyTrack const st = study_track(plan.track);
  std::size_t const ci = plan.case_index(case_id);
  if (label == "GT") {
    return challenge_refs(refs, st).at(case_id);
  }
  std::size_t const f = plan.unblind(ci, plan.reader_index(reader_id), label);
  auto const path = root / "submissions" / plan.finalists[f].submission_id / fmt::format("R{}", st.accel) /
                    (case_id + ".ksb1");
  CaseFile file = read_case(path);
  if (!file.rss) {
    throw Error(ErrorCode::InvalidData, "stored submission volume has no image");
  }
  return std::move(*file.rss);
}

std::vector<std::uint8_t> study_png(const StudyPlan &plan, const std::filesystem::path &root,
                                    const ReferenceSet &refs, const std::string &case_id,
                                    const std::string &reader_id, const std::string &label, std::size_t slice)
{
  StudyTrack const st = study_track(plan.track);
  double const hi = display_max(challenge_refs(refs, st).at(case_id));
  return render_slice_png(study_volume(plan, root, refs, case_id, reader_id, label), slice, hi);
}

Json study_response_event(const StudyPlan &plan, const ReaderResponse &resp)
{
  UnblindedResponse const u = validate_response(resp, plan);
  Json j = u.to_json();
  j["track"] = plan.track;
  j["blinded"] = resp.to_json();
  return j;
}

} // namespace mrb
