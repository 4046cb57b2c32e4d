#include "mrbench/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include "mrbench/container.hpp"
#include "mrbench/pipeline.hpp"
#include "mrbench/render.hpp"
#include "mrbench/report.hpp"
#include "mrbench/server.hpp"
#include "mrbench/study_fixture.hpp"
#include "mrbench/study_service.hpp"

namespace mrb {

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool force = false;

  void add_to(CLI::App *app, bool with_force = true)
  {
    app->add_option("--config", config, "TOML run config");
    app->add_option("--seed", seed, "override the config seed");
    app->add_option("--jobs", jobs, "worker threads");
    if (with_force) {
      app->add_flag("--force", force, "replace a differing output directory");
    }
  }

  RunConfig load() const
  {
    RunConfig c = config.empty() ? RunConfig::parse("", "<defaults>") : RunConfig::load(config);
    if (seed) {
      c.seed = *seed;
      c.dataset.seed = *seed;
    }
    if (jobs) {
      c.jobs = *jobs;
      c.dataset.jobs = *jobs;
      for (auto &[m, r] : c.recon) {
        r.jobs = *jobs;
      }
    }
    c.validate();
    return c;
  }
};

std::string abs_str(const fs::path &p) { return fs::absolute(p).lexically_normal().string(); }

void require_dir(const fs::path &p, const std::string &what)
{
  if (!fs::is_directory(p)) {
    throw Error(ErrorCode::NotFound, what + " " + p.string() + " does not exist");
  }
}

// "http://host:port" -> client
httplib::Client client_for(const std::string &url)
{
  httplib::Client c(url);
  c.set_connection_timeout(10);
  c.set_read_timeout(600);
  return c;
}

void check_reply(const httplib::Result &res, std::ostream &out)
{
  if (!res) {
    throw Error(ErrorCode::IoError, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status >= 300) {
    std::string code = "IoError";
    std::string detail = res->body;
    try {
      Json const j = Json::parse(res->body);
      code = j.value("error", code);
      detail = j.value("detail", detail);
    } catch (const Json::exception &) {
    }
    throw std::runtime_error(fmt::format("HTTP {} {}: {}", res->status, code, detail));
  }
  out << res->body << "\n";
}

ReferenceSet refs_or_empty(const std::string &dataset)
{
  require_dir(dataset, "dataset");
  return load_references(dataset);
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"MRI reconstruction benchmark"};
  app.require_subcommand(1);
  Common common;

  // gen
  std::string out_dir;
  auto *gen = app.add_subcommand("gen", "simulate the dataset");
  common.add_to(gen);
  gen->add_option("--out", out_dir)->required();

  // mask
  std::string dataset;
  auto *mask = app.add_subcommand("mask", "undersample the test and challenge cases");
  common.add_to(mask);
  mask->add_option("--dataset", dataset)->required();
  mask->add_option("--out", out_dir)->required();

  // recon
  std::string masked, track, phase = "test", method;
  auto *recon = app.add_subcommand("recon", "run a baseline over one split");
  common.add_to(recon);
  recon->add_option("--masked", masked)->required();
  recon->add_option("--track", track)->required();
  recon->add_option("--phase", phase);
  recon->add_option("--method", method)->required();
  recon->add_option("--out", out_dir)->required();

  // score
  std::string submission;
  auto *score = app.add_subcommand("score", "score a submission directory offline");
  common.add_to(score);
  score->add_option("--dataset", dataset)->required();
  score->add_option("--submission", submission)->required();
  score->add_option("--out", out_dir)->required();

  // serve
  std::string root, port_file;
  std::optional<int> port;
  auto *serve = app.add_subcommand("serve", "run the evaluation server");
  common.add_to(serve, false);
  serve->add_option("--dataset", dataset)->required();
  serve->add_option("--root", root)->required();
  serve->add_option("--port", port);
  serve->add_option("--port-file", port_file, "write the bound port here");

  // submit / close
  std::string server, token, at;
  auto *submit = app.add_subcommand("submit", "upload a submission directory");
  submit->add_option("--server", server)->required();
  submit->add_option("--token", token)->required();
  submit->add_option("--submission", submission)->required();
  auto *close = app.add_subcommand("close", "close the challenge window");
  close->add_option("--server", server)->required();
  close->add_option("--token", token)->required();
  close->add_option("--at", at);

  // study
  auto *study = app.add_subcommand("study", "reader study");
  study->require_subcommand(1);
  auto *plan = study->add_subcommand("plan", "draw cases and blind the finalists");
  common.add_to(plan);
  plan->add_option("--dataset", dataset)->required();
  plan->add_option("--root", root)->required();
  plan->add_option("--track", track)->required();
  auto *aggregate = study->add_subcommand("aggregate", "aggregate recorded responses");
  common.add_to(aggregate);
  aggregate->add_option("--root", root)->required();
  aggregate->add_option("--track", track)->required();
  aggregate->add_option("--out", out_dir)->required();
  auto *exportc = study->add_subcommand("export", "write per-reader bundles with PNG renders");
  common.add_to(exportc);
  exportc->add_option("--dataset", dataset)->required();
  exportc->add_option("--root", root)->required();
  exportc->add_option("--track", track)->required();
  exportc->add_option("--out", out_dir)->required();

  // report
  bool fixture = false;
  auto *report = app.add_subcommand("report", "challenge report from the event log");
  common.add_to(report);
  report->add_option("--root", root);
  report->add_flag("--fixture", fixture, "use the built-in reference challenge state");
  report->add_option("--out", out_dir)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) {
      RunConfig const cfg = common.load();
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        generate_dataset(cfg, dir);
        write_json(dir / "run_manifest.json", run_manifest(cfg, "gen", Json::object()));
      });
    } else if (mask->parsed()) {
      RunConfig const cfg = common.load();
      require_dir(dataset, "dataset");
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        generate_masked(cfg, dataset, dir);
        write_json(dir / "run_manifest.json", run_manifest(cfg, "mask", {{"dataset", abs_str(dataset)}}));
      });
    } else if (recon->parsed()) {
      RunConfig const cfg = common.load();
      require_dir(masked, "masked input");
      ReconMethod const m = recon_method_from_string(method);
      Phase const ph = phase_from_string(phase);
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        reconstruct_split(cfg, masked, track, ph, m, dir);
        write_json(dir / "run_manifest.json",
                   run_manifest(cfg, "recon",
                                {{"masked", abs_str(masked)}, {"track", track}, {"phase", phase}, {"method", method}}));
      });
    } else if (score->parsed()) {
      RunConfig const cfg = common.load();
      require_dir(dataset, "dataset");
      require_dir(submission, "submission");
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        write_json(dir / "score.json", score_submission_dir(cfg, dataset, submission));
        write_json(dir / "run_manifest.json",
                   run_manifest(cfg, "score", {{"dataset", abs_str(dataset)}, {"submission", abs_str(submission)}}));
      });
    } else if (serve->parsed()) {
      RunConfig const cfg = common.load();
      EvalService svc(EvalConfig{root, cfg.jobs}, refs_or_empty(dataset));
      EvalServer srv(cfg.serve, svc);
      int const bound = srv.bind(cfg.serve.host, port.value_or(cfg.serve.port));
      if (!port_file.empty()) {
        write_text(port_file + ".tmp", fmt::format("{}\n", bound));
        fs::rename(port_file + ".tmp", port_file);
      }
      out << fmt::format("listening on http://{}:{}", cfg.serve.host, bound) << std::endl;
      srv.run();
    } else if (submit->parsed()) {
      Json const man = read_json(fs::path(submission) / "manifest.json");
      std::string const tr = man.at("track").get<std::string>();
      std::string const ph = man.at("phase").get<std::string>();
      httplib::MultipartFormDataItems items;
      items.push_back({"manifest", Json{{"description", man.value("description", std::string())}}.dump(), "",
                       "application/json"});
      for (int accel : track_accelerations(tr)) {
        fs::path const d = fs::path(submission) / fmt::format("R{}", accel);
        require_dir(d, "volume directory");
        std::vector<fs::path> files;
        for (const auto &e : fs::directory_iterator(d)) {
          files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto &f : files) {
          auto const bytes = read_bytes(f);
          items.push_back({fmt::format("R{}", accel), std::string(bytes.begin(), bytes.end()),
                           f.filename().string(), "application/octet-stream"});
        }
      }
      auto cli = client_for(server);
      cli.set_bearer_token_auth(token);
      check_reply(cli.Post(fmt::format("/api/{}/{}/submissions", ph, tr), items), out);
    } else if (close->parsed()) {
      auto cli = client_for(server);
      cli.set_bearer_token_auth(token);
      Json body = Json::object();
      if (!at.empty()) {
        body["at"] = at;
      }
      check_reply(cli.Post("/api/admin/close_window", body.dump(), "application/json"), out);
    } else if (plan->parsed()) {
      RunConfig const cfg = common.load();
      auto const refs = refs_or_empty(dataset);
      LeaderboardState const state = replay_file(fs::path(root) / "events.jsonl");
      StudyPlan const p = make_study_plan(state, refs, track, cfg.study, cfg.seed);
      fs::path const path = study_plan_path(root, track);
      std::string const text = p.to_json().dump(2) + "\n";
      if (fs::exists(path) && !common.force) {
        std::ifstream in(path, std::ios::binary);
        std::string const old((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (old != text) {
          throw Error(ErrorCode::InvalidArgument, path.string() + " exists with a different plan; pass --force");
        }
      }
      fs::create_directories(path.parent_path());
      write_text(path, text);
      out << path.string() << "\n";
    } else if (aggregate->parsed()) {
      RunConfig const cfg = common.load();
      StudyTrack const st = study_track(track);
      LeaderboardState const state = replay_file(fs::path(root) / "events.jsonl");
      StudyResult res = aggregate_ranks(state.study_responses(st.name), cfg.study.n_readers);
      res.track = st.name;
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        write_json(dir / "study.json", res.to_json());
        write_text(dir / "study.csv", res.to_csv());
        write_json(dir / "run_manifest.json", run_manifest(cfg, "study aggregate", {{"root", abs_str(root)}, {"track", track}}));
      });
    } else if (exportc->parsed()) {
      RunConfig const cfg = common.load();
      auto const refs = refs_or_empty(dataset);
      StudyPlan const p = load_study_plan(root, track);
      LeaderboardState const state = replay_file(fs::path(root) / "events.jsonl");
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        for (const auto &reader : p.readers) {
          Json const bundle = reader_bundle(p, refs, state, reader);
          for (const auto &c : bundle.at("cases")) {
            std::string const case_id = c.at("case_id").get<std::string>();
            fs::path const cdir = dir / reader / case_id;
            fs::create_directories(cdir);
            Json desc = c;
            desc["track"] = p.track;
            desc["reader_id"] = reader;
            desc["labels"] = bundle.at("labels");
            desc["criteria"] = bundle.at("criteria");
            desc["scale"] = bundle.at("scale");
            Json files = Json::object();
            std::size_t const nslices = c.at("nslices").get<std::size_t>();
            for (const auto &[label, urls] : c.at("images").items()) {
              (void)urls;
              for (std::size_t s = 0; s < nslices; ++s) {
                std::string const name = fmt::format("{}_{:03d}.png", label, s);
                auto const png = study_png(p, root, refs, case_id, reader, label, s);
                write_bytes(cdir / name, png);
                files[label].push_back(name);
              }
            }
            desc["images"] = files;
            write_json(cdir / "descriptor.json", desc);
          }
        }
        write_json(dir / "run_manifest.json",
                   run_manifest(cfg, "study export", {{"root", abs_str(root)}, {"track", track}}));
      });
    } else if (report->parsed()) {
      RunConfig const cfg = common.load();
      if (fixture == !root.empty()) {
        throw Error(ErrorCode::InvalidArgument, "report needs exactly one of --root and --fixture");
      }
      LeaderboardState const state =
          fixture ? replay(fixture_events()) : replay_file(fs::path(root) / "events.jsonl");
      std::size_t const readers = fixture ? 7 : cfg.study.n_readers;
      write_run_dir(out_dir, common.force, [&](const fs::path &dir) {
        write_report(state, dir, readers);
        write_json(dir / "run_manifest.json",
                   run_manifest(cfg, "report", {{"source", fixture ? std::string("fixture") : abs_str(root)}}));
      });
    }
  } catch (const std::exception &e) {
    err << "mrbench: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

} // namespace mrb
