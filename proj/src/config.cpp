#include "mrbench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "mrbench/error.hpp"
#include "mrbench/eval.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

namespace {

[[noreturn]] void fail(const std::string &where, const std::string &what)
{
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void check_keys(const toml::table &t, const std::string &where, const std::set<std::string> &allowed)
{
  for (const auto &[k, v] : t) {
    if (!allowed.count(std::string(k.str()))) {
      fail(where, fmt::format("unknown key '{}'", k.str()));
    }
  }
}

const toml::table *sub_table(const toml::table &t, const std::string &key, const std::string &where)
{
  const toml::node *n = t.get(key);
  if (!n) {
    return nullptr;
  }
  if (!n->is_table()) {
    fail(where, fmt::format("'{}' must be a table", key));
  }
  return n->as_table();
}

template <typename T> void read_int(const toml::table &t, const std::string &key, const std::string &where, T &out)
{
  const toml::node *n = t.get(key);
  if (!n) {
    return;
  }
  auto v = n->value<std::int64_t>();
  if (!v || !n->is_integer()) {
    fail(where, fmt::format("'{}' must be an integer", key));
  }
  if (*v < 0) {
    fail(where, fmt::format("'{}' must be >= 0", key));
  }
  out = static_cast<T>(*v);
}

void read_double(const toml::table &t, const std::string &key, const std::string &where, double &out)
{
  const toml::node *n = t.get(key);
  if (!n) {
    return;
  }
  if (!n->is_number()) {
    fail(where, fmt::format("'{}' must be a number", key));
  }
  out = *n->value<double>();
}

void read_string(const toml::table &t, const std::string &key, const std::string &where, std::string &out)
{
  const toml::node *n = t.get(key);
  if (!n) {
    return;
  }
  if (!n->is_string()) {
    fail(where, fmt::format("'{}' must be a string", key));
  }
  out = *n->value<std::string>();
}

std::map<std::string, std::string> read_string_map(const toml::table &t, const std::string &where)
{
  std::map<std::string, std::string> out;
  for (const auto &[k, v] : t) {
    if (!v.is_string()) {
      fail(where, fmt::format("'{}' must be a string", k.str()));
    }
    out[std::string(k.str())] = *v.value<std::string>();
  }
  return out;
}

ReconConfig read_recon(const toml::table *t, ReconMethod m, const std::string &where)
{
  ReconConfig c = ReconConfig::defaults(m);
  if (!t) {
    return c;
  }
  check_keys(*t, where, {"max_iters", "tol", "lambda_tv", "lambda_scale", "mode", "tv_inner_iters"});
  read_int(*t, "max_iters", where, c.max_iters);
  read_double(*t, "tol", where, c.tol);
  read_double(*t, "lambda_scale", where, c.lambda_scale);
  read_int(*t, "tv_inner_iters", where, c.tv_inner_iters);
  if (t->get("lambda_tv")) {
    double l = 0.0;
    read_double(*t, "lambda_tv", where, l);
    c.lambda_tv = l;
  }
  std::string mode = c.cs_mode == CsMode::Ista ? "ista" : "fista";
  read_string(*t, "mode", where, mode);
  if (mode != "ista" && mode != "fista") {
    fail(where, "mode must be \"ista\" or \"fista\"");
  }
  c.cs_mode = mode == "ista" ? CsMode::Ista : CsMode::Fista;
  return c;
}

} // namespace

RunConfig RunConfig::parse(const std::string &text, const std::string &source)
{
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error &e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    fail(source, msg.str());
  }
  RunConfig c;
  check_keys(root, source, {"seed", "jobs", "dataset", "sampling", "recon", "study", "serve"});
  read_int(root, "seed", source, c.seed);
  read_int(root, "jobs", source, c.jobs);

  if (const auto *d = sub_table(root, "dataset", source)) {
    std::string const w = source + " [dataset]";
    check_keys(*d, w, {"ncases", "height", "width", "ncoils", "nslices", "base_snr", "crop", "split_fractions"});
    read_int(*d, "ncases", w, c.dataset.ncases);
    read_int(*d, "height", w, c.dataset.height);
    read_int(*d, "width", w, c.dataset.width);
    read_int(*d, "ncoils", w, c.dataset.ncoils);
    read_int(*d, "nslices", w, c.dataset.nslices);
    read_double(*d, "base_snr", w, c.dataset.base_snr);
    read_int(*d, "crop", w, c.dataset.crop);
    if (const toml::node *f = d->get("split_fractions")) {
      const toml::array *arr = f->as_array();
      if (!arr) {
        fail(w, "'split_fractions' must be an array");
      }
      for (const auto &x : *arr) {
        if (!x.is_number()) {
          fail(w, "'split_fractions' entries must be numbers");
        }
        c.split_fractions.push_back(*x.value<double>());
      }
    }
  }
  if (const auto *s = sub_table(root, "sampling", source)) {
    std::string const w = source + " [sampling]";
    check_keys(*s, w, {"center_fraction_r4", "center_fraction_r8"});
    read_double(*s, "center_fraction_r4", w, c.center_fraction_r4);
    read_double(*s, "center_fraction_r8", w, c.center_fraction_r8);
  }
  const toml::table *recon = sub_table(root, "recon", source);
  if (recon) {
    check_keys(*recon, source + " [recon]", {"zero_filled", "cg_sense", "cs_tv"});
  }
  for (ReconMethod m : {ReconMethod::ZeroFilled, ReconMethod::CgSense, ReconMethod::CsTv}) {
    std::string const name = to_string(m);
    const toml::table *t = recon ? sub_table(*recon, name, source + " [recon]") : nullptr;
    c.recon[m] = read_recon(t, m, source + " [recon." + name + "]");
  }
  if (const auto *s = sub_table(root, "study", source)) {
    std::string const w = source + " [study]";
    check_keys(*s, w, {"n_cases", "n_readers", "finalists"});
    read_int(*s, "n_cases", w, c.study.n_cases);
    read_int(*s, "n_readers", w, c.study.n_readers);
    read_int(*s, "finalists", w, c.study.finalists);
  }
  if (const auto *s = sub_table(root, "serve", source)) {
    std::string const w = source + " [serve]";
    check_keys(*s, w, {"host", "port", "admin_token", "clock", "clock_step_seconds", "teams", "readers"});
    read_string(*s, "host", w, c.serve.host);
    read_int(*s, "port", w, c.serve.port);
    read_string(*s, "admin_token", w, c.serve.admin_token);
    read_string(*s, "clock", w, c.serve.clock);
    read_int(*s, "clock_step_seconds", w, c.serve.clock_step_seconds);
    if (const auto *t = sub_table(*s, "teams", w)) {
      c.serve.teams = read_string_map(*t, w + ".teams");
    }
    if (const auto *t = sub_table(*s, "readers", w)) {
      c.serve.readers = read_string_map(*t, w + ".readers");
    }
  }
  c.dataset.seed = c.seed;
  c.dataset.jobs = c.jobs;
  for (auto &[m, r] : c.recon) {
    r.crop = c.dataset.crop;
    r.jobs = c.jobs;
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::validate() const
{
  try {
    dataset.validate();
    for (const auto &[m, r] : recon) {
      r.validate();
    }
    for (double cf : {center_fraction_r4, center_fraction_r8}) {
      if (!(cf > 0.0 && cf < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "center fractions must be in (0, 1)");
      }
    }
    split_sizes(dataset.ncases, fractions());
    if (jobs < 1) {
      throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
    }
    if (study.n_cases < 1 || study.n_readers < 1 || study.finalists < 1) {
      throw Error(ErrorCode::InvalidArgument, "study sizes must be >= 1");
    }
    if (serve.port < 0 || serve.port > 65535) {
      throw Error(ErrorCode::InvalidArgument, "port out of range");
    }
    if (serve.clock != "system") {
      parse_rfc3339(serve.clock);
    }
    for (const auto &[tok, team] : serve.teams) {
      if (tok.empty() || team.empty() || tok == serve.admin_token || serve.readers.count(tok)) {
        throw Error(ErrorCode::InvalidArgument, "team tokens must be non-empty and distinct from other tokens");
      }
    }
  } catch (const Error &e) {
    if (e.code() == ErrorCode::ConfigError) {
      throw;
    }
    throw Error(ErrorCode::ConfigError, e.detail());
  }
}

std::vector<double> RunConfig::fractions() const
{
  return split_fractions.empty() ? default_split_fractions() : split_fractions;
}

Json RunConfig::to_json() const
{
  Json r = Json::object();
  for (const auto &[m, c] : recon) {
    Json j = c.to_json();
    j.erase("crop");
    j.erase("jobs");
    r[to_string(m)] = j;
  }
  // jobs is left out: outputs do not depend on it.
  return {{"seed", seed},
          {"dataset",
           {{"ncases", dataset.ncases},
            {"height", dataset.height},
            {"width", dataset.width},
            {"ncoils", dataset.ncoils},
            {"nslices", dataset.nslices},
            {"base_snr", dataset.base_snr},
            {"crop", dataset.crop},
            {"split_fractions", fractions()}}},
          {"sampling", {{"center_fraction_r4", center_fraction_r4}, {"center_fraction_r8", center_fraction_r8}}},
          {"recon", r},
          {"study", {{"n_cases", study.n_cases}, {"n_readers", study.n_readers}, {"finalists", study.finalists}}},
          {"serve",
           {{"host", serve.host},
            {"port", serve.port},
            {"clock", serve.clock},
            {"clock_step_seconds", serve.clock_step_seconds},
            // Tokens are secrets; only the identities are recorded.
            {"teams", [&] {
               std::set<std::string> s;
               for (const auto &[t, id] : serve.teams) {
                 s.insert(id);
               }
               return Json(s);
             }()},
            {"readers", [&] {
               std::set<std::string> s;
               for (const auto &[t, id] : serve.readers) {
                 s.insert(id);
               }
               return Json(s);
             }()}}}};
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a64(to_json().dump())); }

TrackConfig RunConfig::track(const std::string &name) const
{
  TrackConfig t = TrackConfig::parse(name);
  t.center_fraction = t.accel == 8 ? center_fraction_r8 : center_fraction_r4;
  return t;
}

const ReconConfig &RunConfig::recon_config(ReconMethod m) const { return recon.at(m); }

} // namespace mrb
