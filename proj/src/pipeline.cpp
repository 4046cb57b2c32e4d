#include "mrbench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mrbench/container.hpp"
#include "mrbench/error.hpp"
#include "mrbench/metrics.hpp"
#include "mrbench/parallel.hpp"
#include "mrbench/recon.hpp"
#include "mrbench/rng.hpp"
#include "mrbench/suite.hpp"

namespace mrb {

namespace {

const std::vector<std::string> kScoredSplits = {"test_mc", "test_sc", "challenge_mc", "challenge_sc"};

bool is_multicoil_split(const std::string &split) { return split.size() > 3 && split.substr(split.size() - 3) == "_mc"; }

std::vector<fs::path> tree_files(const fs::path &root)
{
  std::vector<fs::path> out;
  for (const auto &e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out.push_back(fs::relative(e.path(), root));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

// ---- small io ------------------------------------------------------------------

void write_text(const fs::path &path, const std::string &text)
{
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

void write_json(const fs::path &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::NotFound, "missing " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception &e) {
    throw Error(ErrorCode::InvalidData, path.string() + ": " + e.what());
  }
}

bool same_tree(const fs::path &a, const fs::path &b)
{
  auto const fa = tree_files(a);
  if (fa != tree_files(b)) {
    return false;
  }
  for (const auto &rel : fa) {
    if (read_bytes(a / rel) != read_bytes(b / rel)) {
      return false;
    }
  }
  return true;
}

void write_run_dir(const fs::path &out, bool force, const std::function<void(const fs::path &)> &build)
{
  fs::path const target = fs::absolute(out).lexically_normal();
  fs::path const staging = target.parent_path() / ("." + target.filename().string() + ".staging");
  fs::create_directories(target.parent_path());
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    build(staging);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  if (fs::exists(target)) {
    if (same_tree(target, staging)) {
      fs::remove_all(staging);
      return;
    }
    if (!force) {
      fs::remove_all(staging);
      throw Error(ErrorCode::InvalidArgument,
                  target.string() + " exists with different contents; pass --force to replace it");
    }
    fs::remove_all(target);
  }
  fs::rename(staging, target);
}

Json run_manifest(const RunConfig &cfg, const std::string &command, const Json &inputs)
{
  return {{"command", command}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"inputs", inputs},
          {"config", cfg.to_json()}};
}

// ---- dataset --------------------------------------------------------------------

Json DatasetInfo::to_json() const
{
  Json c = Json::object();
  for (const auto &[id, con] : contrasts) {
    c[id] = to_string(con);
  }
  return {{"splits", splits.to_json()}, {"contrasts", c}};
}

DatasetInfo DatasetInfo::from_json(const Json &j)
{
  DatasetInfo d;
  d.splits = SplitManifest::from_json(j.at("splits"));
  for (const auto &[id, con] : j.at("contrasts").items()) {
    d.contrasts[id] = contrast_from_string(con.get<std::string>());
  }
  return d;
}

DatasetInfo read_dataset_info(const fs::path &dataset) { return DatasetInfo::from_json(read_json(dataset / "manifest.json")); }

fs::path dataset_case_path(const fs::path &dataset, CoilMode mode, const std::string &case_id)
{
  return dataset / (mode == CoilMode::Multi ? "multicoil" : "singlecoil") / (case_id + ".ksb1");
}

void generate_dataset(const RunConfig &cfg, const fs::path &out)
{
  SuiteConfig const &suite = cfg.dataset;
  DatasetInfo info;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < suite.ncases; ++i) {
    ids.push_back(suite_case_id(i));
    info.contrasts[ids.back()] = suite_case_config(suite, i).contrast;
  }
  info.splits = split_dataset(ids, cfg.seed, cfg.fractions());
  fs::create_directories(out / "multicoil");
  fs::create_directories(out / "singlecoil");
  // One case at a time per worker; each case is self-contained.
  parallel_for(suite.ncases, cfg.jobs, [&](std::size_t i) {
    SuiteConfig one = suite;
    one.jobs = 1;
    SuiteCase c = make_suite_case(one, i);
    CaseFile mc;
    mc.attrs = c.sim.kspace.attrs;
    mc.kspace = std::move(c.sim.kspace);
    mc.rss = std::move(c.sim.ground_truth);
    write_case(dataset_case_path(out, CoilMode::Multi, ids[i]), mc);
    CaseFile sc;
    sc.attrs = c.single_coil.attrs;
    sc.kspace = std::move(c.single_coil);
    sc.rss = std::move(c.single_coil_truth);
    write_case(dataset_case_path(out, CoilMode::Single, ids[i]), sc);
  });
  write_json(out / "manifest.json", info.to_json());
}

ReferenceSet load_references(const fs::path &dataset)
{
  auto const info = read_dataset_info(dataset);
  ReferenceSet refs;
  for (const auto &split : kScoredSplits) {
    CoilMode const mode = is_multicoil_split(split) ? CoilMode::Multi : CoilMode::Single;
    for (const auto &id : info.splits.splits.at(split)) {
      CaseFile f = read_case(dataset_case_path(dataset, mode, id));
      if (!f.rss) {
        throw Error(ErrorCode::InvalidData, "case " + id + " has no reference image");
      }
      refs[split][id] = std::move(*f.rss);
    }
  }
  return refs;
}

// ---- masking ----------------------------------------------------------------------

void generate_masked(const RunConfig &cfg, const fs::path &dataset, const fs::path &out)
{
  auto const info = read_dataset_info(dataset);
  Json cases = Json::object();
  for (const auto &split : kScoredSplits) {
    cases[split] = info.splits.splits.at(split);
  }
  write_json(out / "cases.json", cases);
  for (const std::string name : {"mc_r4", "mc_r8", "sc_r4"}) {
    TrackConfig const track = cfg.track(name);
    bool const multi = track.coil_mode == CoilMode::Multi;
    std::vector<std::string> ids;
    for (const char *phase : {"test", "challenge"}) {
      auto const &list = info.splits.splits.at(std::string(phase) + (multi ? "_mc" : "_sc"));
      ids.insert(ids.end(), list.begin(), list.end());
    }
    fs::create_directories(out / name);
    std::uint64_t const base = derive_seed(cfg.seed, fmt::format("R{}", track.accel));
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
      CaseFile full = read_case(dataset_case_path(dataset, track.coil_mode, ids[i]));
      if (!full.kspace) {
        throw Error(ErrorCode::InvalidData, "case " + ids[i] + " has no k-space");
      }
      SamplingMask const mask = make_mask(full.kspace->width, track.accel, track.center_fraction,
                                          mask_seed_for_case(base, ids[i]));
      CaseFile m;
      m.kspace = apply_mask(*full.kspace, mask);
      m.attrs = m.kspace->attrs;
      write_case(out / name / (ids[i] + ".ksb1"), m);
    });
  }
}

// ---- recon --------------------------------------------------------------------------

void reconstruct_split(const RunConfig &cfg, const fs::path &masked, const std::string &track, Phase phase,
                       ReconMethod method, const fs::path &out)
{
  validate_track(track);
  if (method == ReconMethod::CgSense && track == "singlecoil") {
    throw Error(ErrorCode::NotApplicable, "cg_sense needs multi-coil input");
  }
  ReconConfig rc = cfg.recon_config(method);
  rc.jobs = 1;
  std::string const split = split_for(phase, track);
  std::string const prefix = track == "multicoil" ? "mc" : "sc";
  Json man = {{"track", track}, {"phase", to_string(phase)}, {"description", to_string(method) + " baseline"},
              {"method", to_string(method)}};
  Json const cases = read_json(masked / "cases.json");
  std::vector<std::string> const ids = cases.at(split).get<std::vector<std::string>>();
  for (int accel : track_accelerations(track)) {
    fs::path const in_dir = masked / fmt::format("{}_r{}", prefix, accel);
    fs::path const out_dir = out / fmt::format("R{}", accel);
    fs::create_directories(out_dir);
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
      CaseFile in = read_case(in_dir / (ids[i] + ".ksb1"));
      if (!in.kspace) {
        throw Error(ErrorCode::InvalidData, "masked case " + ids[i] + " has no k-space");
      }
      ReconOutput r = reconstruct(*in.kspace, rc);
      CaseFile f;
      f.attrs = r.image.attrs;
      f.rss = std::move(r.image);
      write_case(out_dir / (ids[i] + ".ksb1"), f);
    });
  }
  write_json(out / "manifest.json", man);
}

Submission read_submission_dir(const fs::path &dir)
{
  Json const man = read_json(dir / "manifest.json");
  Submission s;
  s.track = man.at("track").get<std::string>();
  validate_track(s.track);
  s.phase = phase_from_string(man.at("phase").get<std::string>());
  s.description = man.value("description", std::string());
  for (int accel : track_accelerations(s.track)) {
    fs::path const d = dir / fmt::format("R{}", accel);
    if (!fs::is_directory(d)) {
      throw Error(ErrorCode::SubmissionIncomplete, fmt::format("{} has no R{} directory", dir.string(), accel));
    }
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(d)) {
      files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
      CaseFile c = read_case(f);
      if (!c.rss) {
        throw Error(ErrorCode::InvalidData, f.string() + " has no reconstruction");
      }
      s.volumes[accel].push_back(std::move(*c.rss));
    }
  }
  return s;
}

Json score_submission_dir(const RunConfig &cfg, const fs::path &dataset, const fs::path &submission)
{
  Submission const s = read_submission_dir(submission);
  auto const refs = load_references(dataset);
  auto const reports = score_submission(s, refs, cfg.jobs);
  Json r = Json::object();
  for (const auto &[accel, rep] : reports) {
    r[fmt::format("R{}", accel)] = rep.to_json();
  }
  return {{"track", s.track}, {"phase", to_string(s.phase)}, {"description", s.description}, {"reports", r}};
}

} // namespace mrb
