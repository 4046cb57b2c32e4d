#pragma once

#include <filesystem>

#include "mrbench/eval.hpp"

namespace mrb {

// Challenge report from a replayed state:
//   report.md          leaderboards, reader-study tables, SSIM summary
//   report.json        the same content as data
//   ssim_summary.csv   every challenge submission's SSIM per track/accel
//   study_<t>.csv, scatter_<t>.csv, rank_grid_<t>.csv per complete study
// Output depends only on the state.
void write_report(const LeaderboardState &state, const std::filesystem::path &out, std::size_t n_readers = 7);

} // namespace mrb
