#include "mrbench/server.hpp"

#include <algorithm>
#include <filesystem>

#include <fmt/format.h>
#include <httplib.h>

#include "mrbench/container.hpp"
#include "mrbench/render.hpp"
#include "mrbench/study_service.hpp"

namespace mrb {

int http_status(ErrorCode code)
{
  switch (code) {
  case ErrorCode::Unauthorized:
    return 401;
  case ErrorCode::Sealed:
    return 403;
  case ErrorCode::NotFound:
    return 404;
  case ErrorCode::AlreadySubmitted:
  case ErrorCode::WindowClosed:
  case ErrorCode::StudyInfeasible:
  case ErrorCode::IncompleteStudy:
    return 409;
  case ErrorCode::SubmissionIncomplete:
  case ErrorCode::InvalidPermutation:
  case ErrorCode::IncompleteResponse:
  case ErrorCode::OutOfScale:
  case ErrorCode::ShapeMismatch:
  case ErrorCode::CorruptContainer:
  case ErrorCode::InvalidData:
    return 422;
  case ErrorCode::RateLimited:
    return 429;
  case ErrorCode::IoError:
    return 500;
  default:
    return 400;
  }
}

Json error_body(const Error &e) { return {{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}}; }

namespace {

std::string bearer(const httplib::Request &req)
{
  std::string const h = req.get_header_value("Authorization");
  std::string const prefix = "Bearer ";
  if (h.rfind(prefix, 0) == 0) {
    return h.substr(prefix.size());
  }
  return req.get_param_value("token");
}

void send_json(httplib::Response &res, int status, const Json &j)
{
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_png(httplib::Response &res, const std::vector<std::uint8_t> &png)
{
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

// Runs fn and turns errors into JSON error bodies.
template <typename Fn> httplib::Server::Handler guarded(Fn fn)
{
  return [fn](const httplib::Request &req, httplib::Response &res) {
    try {
      fn(req, res);
    } catch (const Error &e) {
      send_json(res, http_status(e.code()), error_body(e));
    } catch (const Json::exception &e) {
      send_json(res, 400, {{"error", "InvalidArgument"}, {"detail", e.what()}});
    } catch (const std::exception &e) {
      send_json(res, 500, {{"error", "InternalError"}, {"detail", e.what()}});
    }
  };
}

bool valid_case_id(const std::string &id)
{
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && id.find("..") == std::string::npos;
}

} // namespace

struct EvalServer::Impl {
  ServeConfig cfg;
  EvalService &svc;
  httplib::Server http;
  std::optional<std::int64_t> clock_start;

  Impl(ServeConfig c, EvalService &s) : cfg(std::move(c)), svc(s)
  {
    if (cfg.clock != "system") {
      clock_start = parse_rfc3339(cfg.clock);
    }
  }

  std::int64_t now() const
  {
    if (!clock_start) {
      return utc_now();
    }
    return *clock_start + cfg.clock_step_seconds * static_cast<std::int64_t>(svc.snapshot().entries().size());
  }

  std::string team_for(const httplib::Request &req) const
  {
    auto it = cfg.teams.find(bearer(req));
    if (it == cfg.teams.end()) {
      throw Error(ErrorCode::Unauthorized, "missing or unknown team token");
    }
    return it->second;
  }

  std::string reader_for(const httplib::Request &req) const
  {
    auto it = cfg.readers.find(bearer(req));
    if (it == cfg.readers.end()) {
      throw Error(ErrorCode::Unauthorized, "missing or unknown reader token");
    }
    return it->second;
  }

  void require_admin(const httplib::Request &req) const
  {
    if (cfg.admin_token.empty() || bearer(req) != cfg.admin_token) {
      throw Error(ErrorCode::Unauthorized, "admin token required");
    }
  }

  // Scorecard lookup that respects the sealed challenge board.
  ScoreCard visible_card(const LeaderboardState &state, Phase phase, const std::string &track,
                         const std::string &id) const
  {
    if (phase == Phase::Challenge && !state.challenge_closed()) {
      throw Error(ErrorCode::Sealed, "challenge results are hidden until the window closes");
    }
    const ScoreCard &c = state.entry(id);
    if (c.phase != phase || c.track != track) {
      throw Error(ErrorCode::NotFound, "no submission " + id + " on this board");
    }
    return c;
  }

  void routes()
  {
    char const *board = R"(/api/(test|challenge)/(multicoil|singlecoil))";

    http.Post(std::string(board) + "/submissions", guarded([this](const httplib::Request &req, httplib::Response &res) {
      Submission sub;
      sub.team_id = team_for(req);
      sub.phase = phase_from_string(req.matches[1]);
      sub.track = req.matches[2];
      if (!req.is_multipart_form_data()) {
        throw Error(ErrorCode::InvalidArgument, "expected multipart/form-data");
      }
      if (req.has_file("manifest")) {
        Json const man = Json::parse(req.get_file_value("manifest").content);
        sub.description = man.value("description", std::string());
      }
      for (const auto &[field, part] : req.files) {
        if (field == "manifest") {
          continue;
        }
        if (field.size() < 2 || field[0] != 'R' ||
            !std::all_of(field.begin() + 1, field.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
          throw Error(ErrorCode::InvalidArgument, "unexpected form field '" + field + "'");
        }
        int const accel = std::stoi(field.substr(1));
        std::string const stem = std::filesystem::path(part.filename).stem().string();
        if (!valid_case_id(stem) || std::filesystem::path(part.filename).extension() != ".ksb1") {
          throw Error(ErrorCode::InvalidArgument, "bad volume filename '" + part.filename + "'");
        }
        auto const *p = reinterpret_cast<const std::uint8_t *>(part.content.data());
        CaseFile f = decode_case(std::span<const std::uint8_t>(p, part.content.size()));
        if (!f.rss) {
          throw Error(ErrorCode::InvalidArgument, part.filename + " holds no reconstruction_rss array");
        }
        if (f.rss->attrs.case_id != stem) {
          throw Error(ErrorCode::InvalidArgument, part.filename + " is labelled " + f.rss->attrs.case_id);
        }
        sub.volumes[accel].push_back(std::move(*f.rss));
      }
      for (auto &[accel, vols] : sub.volumes) {
        std::sort(vols.begin(), vols.end(),
                  [](const MagnitudeVolume &a, const MagnitudeVolume &b) { return a.attrs.case_id < b.attrs.case_id; });
      }
      sub.submitted_at = now();
      ScoreCard const card = svc.ingest(sub);
      if (card.phase == Phase::Challenge) {
        // Scores stay sealed; acknowledge only.
        send_json(res, 201,
                  {{"submission_id", card.submission_id},
                   {"team_id", card.team_id},
                   {"track", card.track},
                   {"phase", "challenge"},
                   {"submitted_at", format_rfc3339(card.submitted_at)},
                   {"status", "accepted"}});
      } else {
        send_json(res, 201, card.to_json());
      }
    }));

    http.Get(std::string(board) + "/leaderboard", guarded([this](const httplib::Request &req, httplib::Response &res) {
      Phase const phase = phase_from_string(req.matches[1]);
      std::string const track = req.matches[2];
      auto const state = svc.snapshot();
      Json rows = Json::array();
      for (const auto &c : state.rank(track, phase)) {
        rows.push_back(c.to_json());
      }
      send_json(res, 200, {{"phase", to_string(phase)}, {"track", track}, {"rows", rows}});
    }));

    http.Get(std::string(board) + R"(/submissions/([A-Za-z0-9_-]+)/scorecard)",
             guarded([this](const httplib::Request &req, httplib::Response &res) {
               auto const state = svc.snapshot();
               auto const card = visible_card(state, phase_from_string(req.matches[1]), req.matches[2], req.matches[3]);
               send_json(res, 200, card.to_json(true));
             }));

    http.Get(std::string(board) + R"(/submissions/([A-Za-z0-9_-]+)/thumbnails/([0-9]+)\.png)",
             guarded([this](const httplib::Request &req, httplib::Response &res) {
               auto const state = svc.snapshot();
               auto const card = visible_card(state, phase_from_string(req.matches[1]), req.matches[2], req.matches[3]);
               std::size_t const k = std::stoul(req.matches[4]);
               if (k > 2) {
                 throw Error(ErrorCode::NotFound, "thumbnails are 0, 1 and 2");
               }
               auto const dir = svc.submission_dir(card.submission_id) /
                                fmt::format("R{}", ranking_acceleration(card.track));
               std::vector<std::filesystem::path> files;
               for (const auto &e : std::filesystem::directory_iterator(dir)) {
                 files.push_back(e.path());
               }
               if (files.empty()) {
                 throw Error(ErrorCode::NotFound, "no stored volumes");
               }
               std::sort(files.begin(), files.end());
               CaseFile f = read_case(files.front());
               const MagnitudeVolume &v = *f.rss;
               send_png(res, render_slice_png(v, thumbnail_slices(v.nslices)[k], display_max(v)));
             }));

    http.Get("/api/standings", guarded([this](const httplib::Request &, httplib::Response &res) {
      send_json(res, 200, svc.snapshot().standings());
    }));

    http.Post("/api/admin/close_window", guarded([this](const httplib::Request &req, httplib::Response &res) {
      require_admin(req);
      std::int64_t at = now();
      if (!req.body.empty()) {
        Json const body = Json::parse(req.body);
        if (body.contains("at")) {
          at = parse_rfc3339(body.at("at").get<std::string>());
        }
      }
      svc.close_window(at);
      auto const closed = svc.snapshot().closed_at();
      send_json(res, 200, {{"closed_at", format_rfc3339(*closed)}});
    }));

    http.Post("/api/admin/shutdown", guarded([this](const httplib::Request &req, httplib::Response &res) {
      require_admin(req);
      send_json(res, 200, {{"status", "stopping"}});
      http.stop();
    }));

    char const *study = R"(/api/study/(mc_r4|mc_r8|sc_r4))";

    http.Get(std::string(study) + "/bundle", guarded([this](const httplib::Request &req, httplib::Response &res) {
      std::string const reader = reader_for(req);
      auto const plan = load_study_plan(svc.root(), req.matches[1]);
      send_json(res, 200, reader_bundle(plan, svc.references(), svc.snapshot(), reader));
    }));

    http.Get(std::string(study) + R"(/images/([A-Za-z0-9_.-]+)/(GT|[A-Z])/([0-9]+)\.png)",
             guarded([this](const httplib::Request &req, httplib::Response &res) {
               std::string const reader = reader_for(req);
               auto const plan = load_study_plan(svc.root(), req.matches[1]);
               send_png(res, study_png(plan, svc.root(), svc.references(), req.matches[2], reader, req.matches[3],
                                       std::stoul(req.matches[4])));
             }));

    http.Post(std::string(study) + "/responses", guarded([this](const httplib::Request &req, httplib::Response &res) {
      std::string const reader = reader_for(req);
      auto const plan = load_study_plan(svc.root(), req.matches[1]);
      ReaderResponse const resp = ReaderResponse::from_json(Json::parse(req.body));
      if (resp.reader_id != reader) {
        throw Error(ErrorCode::Unauthorized, "token does not belong to " + resp.reader_id);
      }
      svc.record_study_response(study_response_event(plan, resp));
      send_json(res, 201, {{"status", "accepted"}, {"reader_id", reader}, {"case_id", resp.case_id}});
    }));
  }
};

EvalServer::EvalServer(ServeConfig cfg, EvalService &svc) : impl_(std::make_unique<Impl>(std::move(cfg), svc))
{
  impl_->routes();
}

EvalServer::~EvalServer() { stop(); }

int EvalServer::bind(const std::string &host, int port)
{
  if (port == 0) {
    int const p = impl_->http.bind_to_any_port(host);
    if (p < 0) {
      throw Error(ErrorCode::IoError, "cannot bind " + host);
    }
    return p;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, fmt::format("cannot bind {}:{}", host, port));
  }
  return port;
}

void EvalServer::run() { impl_->http.listen_after_bind(); }

void EvalServer::stop()
{
  if (impl_->http.is_running()) {
    impl_->http.stop();
  }
}

void EvalServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

std::int64_t EvalServer::now() const { return impl_->now(); }

} // namespace mrb
