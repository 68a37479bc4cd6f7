#include "lexdrift/study_http.hpp"

#include <httplib.h>

#include <json.hpp>

#include "lexdrift/error.hpp"
#include "lexdrift/study.hpp"

namespace lexdrift {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view message) {
  reply(res, status, json{{"error", std::string(message)}});
}

// Shared error mapping so every route answers errors the same way.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const NotFoundError& e) {
    fail(res, 404, e.what());
  } catch (const ConflictError& e) {
    fail(res, 409, e.what());
  } catch (const SequencingError& e) {
    fail(res, 422, e.what());
  } catch (const ValidationError& e) {
    fail(res, 400, e.what());
  } catch (const json::exception& e) {
    fail(res, 400, std::string("malformed request body: ") + e.what());
  } catch (const std::exception& e) {
    fail(res, 500, e.what());
  }
}

json parseBody(const httplib::Request& req) {
  auto j = json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

}  // namespace

void mountStudyApi(httplib::Server& server, StudyService& service, const StudyApiOptions& options) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });

  server.Post("/api/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parseBody(req);
      if (!body.contains("participant_id") || !body["participant_id"].is_string()) {
        throw ValidationError("participant_id must be a string");
      }
      const auto session = service.createSession(body["participant_id"].get<std::string>());
      reply(res, 201, {{"session_id", session.sessionId}});
    });
  });

  server.Get(R"(/api/sessions/([^/]+)/trial)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto view = service.nextTrial(req.matches[1].str());
      if (view) {
        reply(res, 200, view->toJson());
      } else {
        reply(res, 200, {{"done", true}});
      }
    });
  });

  server.Post(R"(/api/sessions/([^/]+)/responses)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parseBody(req);
      const auto& idx = body.at("trial_index");
      const auto& rt = body.at("rt_ms");
      if (!idx.is_number_integer()) throw ValidationError("trial_index must be an integer");
      if (!rt.is_number()) throw ValidationError("rt_ms must be a number");
      const auto side = parseChoiceSide(body.at("choice_side").get<std::string>());
      if (!side) throw ValidationError("choice_side must be left or right");
      const auto result =
          service.recordResponse(req.matches[1].str(), idx.get<int>(), *side, rt.get<double>());
      reply(res, 200, {{"accepted", true}, {"too_fast", result.tooFast}});
    });
  });

  server.Get("/api/admin/export", [&service, token = options.adminToken](const httplib::Request& req,
                                                                          httplib::Response& res) {
    if (token.empty() || req.get_header_value("Authorization") != "Bearer " + token) {
      fail(res, 401, "unauthorized");
      return;
    }
    guarded(res, [&] {
      std::ostringstream out;
      service.writeExport(out);
      res.status = 200;
      res.set_content(out.str(), "application/x-ndjson");
    });
  });

  if (!options.staticDir.empty() && !server.set_mount_point("/", options.staticDir)) {
    throw ConfigError("static directory '" + options.staticDir + "' does not exist");
  }
}

}  // namespace lexdrift
