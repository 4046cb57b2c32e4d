#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mrbench/config.hpp"
#include "mrbench/eval.hpp"

namespace mrb {

namespace fs = std::filesystem;

// Dataset directory:
//   manifest.json                 split manifest + contrast per case
//   multicoil/<case_id>.ksb1      full k-space + RSS reference
//   singlecoil/<case_id>.ksb1     emulated single-coil k-space + reference
struct DatasetInfo {
  SplitManifest splits;
  std::map<std::string, Contrast> contrasts;

  Json to_json() const;
  static DatasetInfo from_json(const Json &j);
};

DatasetInfo read_dataset_info(const fs::path &dataset);
fs::path dataset_case_path(const fs::path &dataset, CoilMode mode, const std::string &case_id);

void generate_dataset(const RunConfig &cfg, const fs::path &out);

// Ground truth for the four scored splits.
ReferenceSet load_references(const fs::path &dataset);

// Masked inputs: <out>/<track>/<case_id>.ksb1 for the test and challenge
// cases of the track's coil mode.
void generate_masked(const RunConfig &cfg, const fs::path &dataset, const fs::path &out);

// Submission directory: manifest.json {track, phase, description} plus
// R<accel>/<case_id>.ksb1 holding reconstruction_rss.
void reconstruct_split(const RunConfig &cfg, const fs::path &masked, const std::string &track, Phase phase,
                       ReconMethod method, const fs::path &out);
Submission read_submission_dir(const fs::path &dir);

// Offline scoring against the dataset; returns {"track", "phase", "reports"}.
Json score_submission_dir(const RunConfig &cfg, const fs::path &dataset, const fs::path &submission);

// Builds into a sibling staging directory and renames it into place. An
// existing `out` with identical contents is kept; a differing one needs
// `force`. The staging directory is removed on failure.
void write_run_dir(const fs::path &out, bool force, const std::function<void(const fs::path &)> &build);

// run_manifest.json: command, config hash, seed, inputs.
Json run_manifest(const RunConfig &cfg, const std::string &command, const Json &inputs);
void write_json(const fs::path &path, const Json &j);
Json read_json(const fs::path &path);
void write_text(const fs::path &path, const std::string &text);

// True when both trees hold the same relative paths with equal bytes.
bool same_tree(const fs::path &a, const fs::path &b);

} // namespace mrb
