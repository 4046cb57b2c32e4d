#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrbench/config.hpp"
#include "mrbench/eval.hpp"
#include "mrbench/study.hpp"

namespace mrb {

// <service root>/study/<study track>/plan.json
std::filesystem::path study_plan_path(const std::filesystem::path &root, const std::string &study_track);
StudyPlan load_study_plan(const std::filesystem::path &root, const std::string &study_track);

// Finalists by the study track's own acceleration, cases from the matching
// challenge split. A tie at the cutoff is StudyInfeasible until resolved.
StudyPlan make_study_plan(const LeaderboardState &state, const ReferenceSet &refs, const std::string &study_track,
                          const StudyConfig &cfg, std::uint64_t seed);

// What one reader sees: blinded labels, cases, image URLs. No team or
// submission ids.
Json reader_bundle(const StudyPlan &plan, const ReferenceSet &refs, const LeaderboardState &state,
                   const std::string &reader_id);

// Volume behind (case, reader, label); "GT" is the reference.
MagnitudeVolume study_volume(const StudyPlan &plan, const std::filesystem::path &root, const ReferenceSet &refs,
                             const std::string &case_id, const std::string &reader_id, const std::string &label);
// Slice render windowed by the case's reference so panels are comparable.
std::vector<std::uint8_t> study_png(const StudyPlan &plan, const std::filesystem::path &root,
                                    const ReferenceSet &refs, const std::string &case_id,
                                    const std::string &reader_id, const std::string &label, std::size_t slice);

// Validates and unblinds; returns the log payload.
Json study_response_event(const StudyPlan &plan, const ReaderResponse &resp);

} // namespace mrb
