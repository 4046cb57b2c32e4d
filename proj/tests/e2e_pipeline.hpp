#pragma once

// gen -> mask -> recon x3 -> score -> serve (submit, close, study) -> report,
// driven through the CLI entry point. Throws std::runtime_error on the first
// unexpected outcome. Shared by test_e2e and the acceptance runner.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>

#include "mrbench/cli.hpp"
#include "mrbench/pipeline.hpp"

namespace mrb::e2e {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

inline Outcome cli(const std::vector<std::string> &args)
{
  std::ostringstream out, err;
  Outcome o;
  o.code = run_cli(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

inline void need(bool cond, const std::string &what)
{
  if (!cond) {
    throw std::runtime_error(what);
  }
}

inline void ok(const std::vector<std::string> &args)
{
  Outcome const o = cli(args);
  need(o.code == 0, args[0] + " failed: " + o.err);
}

inline int wait_for_port(const fs::path &file)
{
  for (int i = 0; i < 600; ++i) {
    if (fs::exists(file)) {
      std::ifstream in(file);
      int port = 0;
      in >> port;
      return port;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  throw std::runtime_error("server did not start");
}

// Each reader ranks by a rotation of the label order and gives every image
// its rank as criterion score.
inline void read_study(httplib::Client &c, const std::string &track, const std::vector<std::string> &tokens)
{
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    c.set_bearer_token_auth(tokens[r]);
    auto res = c.Get(fmt::format("/api/study/{}/bundle", track));
    need(res && res->status == 200, "bundle for " + track);
    Json const bundle = Json::parse(res->body);
    need(res->body.find("team") == std::string::npos, "bundle mentions a team");
    auto const labels = bundle["labels"].get<std::vector<std::string>>();
    for (const auto &cs : bundle["cases"]) {
      need(cs["answered"] == false, "case already answered");
      auto png = c.Get(cs["images"]["GT"][0].get<std::string>());
      need(png && png->status == 200, "GT image");
      Json resp = {{"reader_id", bundle["reader_id"]}, {"track", track}, {"case_id", cs["case_id"]}};
      for (std::size_t i = 0; i < labels.size(); ++i) {
        int const rank = static_cast<int>((i + r) % labels.size()) + 1;
        resp["ranks"][labels[i]] = rank;
        for (const auto &crit : bundle["criteria"]) {
          resp["scores"][labels[i]][crit.get<std::string>()] = rank;
        }
      }
      auto post = c.Post(fmt::format("/api/study/{}/responses", track), resp.dump(), "application/json");
      need(post && post->status == 201, "study response: " + (post ? post->body : std::string("no reply")));
    }
  }
}

inline void run_pipeline(const fs::path &work, const fs::path &port_file, const std::string &config)
{
  std::string const w = work.string();
  std::string const ds = w + "/dataset", mk = w + "/masked", svc = w + "/service";
  ok({"gen", "--config", config, "--out", ds});
  ok({"mask", "--config", config, "--dataset", ds, "--out", mk});

  struct Sub {
    std::string dir, token;
  };
  std::vector<Sub> subs;
  std::map<std::string, std::string> const tokens = {
      {"zero_filled", "team-zf"}, {"cg_sense", "team-cg"}, {"cs_tv", "team-cs"}};
  for (const std::string phase : {"test", "challenge"}) {
    for (const std::string track : {"multicoil", "singlecoil"}) {
      for (const std::string method : {"zero_filled", "cg_sense", "cs_tv"}) {
        if (track == "singlecoil" && method == "cg_sense") {
          Outcome const o = cli({"recon", "--config", config, "--masked", mk, "--track", track, "--phase", phase,
                                 "--method", method, "--out", w + "/never"});
          need(o.code != 0 && o.err.find("NotApplicable") != std::string::npos, "cg_sense on single coil");
          continue;
        }
        std::string const dir = fmt::format("{}/sub/{}_{}_{}", w, phase, track, method);
        ok({"recon", "--config", config, "--masked", mk, "--track", track, "--phase", phase, "--method", method,
            "--out", dir});
        subs.push_back({dir, tokens.at(method)});
      }
    }
  }
  need(!fs::exists(w + "/never"), "failed recon left output");

  for (const std::string method : {"zero_filled", "cg_sense", "cs_tv"}) {
    std::string const out = fmt::format("{}/score/{}", w, method);
    ok({"score", "--config", config, "--dataset", ds, "--submission", w + "/sub/test_multicoil_" + method, "--out",
        out});
    Json const s = read_json(out + "/score.json");
    for (const char *r : {"R4", "R8"}) {
      double const v = s["reports"][r]["ssim"];
      need(v > 0.0 && v < 1.0, fmt::format("{} {} ssim {} outside (0, 1)", method, r, v));
    }
  }

  fs::remove(port_file);
  Outcome served;
  std::thread server([&] {
    served = cli({"serve", "--config", config, "--dataset", ds, "--root", svc, "--port", "0", "--port-file",
                  port_file.string()});
  });
  try {
    int const port = wait_for_port(port_file);
    std::string const url = fmt::format("http://127.0.0.1:{}", port);
    for (const auto &s : subs) {
      ok({"submit", "--server", url, "--token", s.token, "--submission", s.dir});
    }
    Outcome const again = cli({"submit", "--server", url, "--token", "team-zf", "--submission",
                               w + "/sub/challenge_multicoil_zero_filled"});
    need(again.code != 0 && again.err.find("AlreadySubmitted") != std::string::npos, "second challenge entry");
    ok({"close", "--server", url, "--token", "admin-token"});

    ok({"study", "plan", "--config", config, "--dataset", ds, "--root", svc, "--track", "mc_r4"});
    ok({"study", "plan", "--config", config, "--dataset", ds, "--root", svc, "--track", "mc_r8"});
    httplib::Client c("127.0.0.1", port);
    read_study(c, "mc_r4", {"reader-1", "reader-2"});
    read_study(c, "mc_r8", {"reader-1", "reader-2"});
    c.set_bearer_token_auth("admin-token");
    auto bye = c.Post("/api/admin/shutdown", "", "application/json");
    need(bye && bye->status == 200, "shutdown");
  } catch (...) {
    // Unblock the server thread before propagating.
    httplib::Client c("127.0.0.1", fs::exists(port_file) ? wait_for_port(port_file) : 0);
    c.set_bearer_token_auth("admin-token");
    c.Post("/api/admin/shutdown", "", "application/json");
    server.join();
    throw;
  }
  server.join();
  need(served.code == 0, "serve exited with " + served.err);

  ok({"study", "aggregate", "--config", config, "--root", svc, "--track", "mc_r8", "--out", w + "/study_mc_r8"});
  ok({"study", "export", "--config", config, "--dataset", ds, "--root", svc, "--track", "mc_r4", "--out",
      w + "/export_mc_r4"});
  ok({"report", "--config", config, "--root", svc, "--out", w + "/report"});
}

} // namespace mrb::e2e
