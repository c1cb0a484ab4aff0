#pragma once

#include <cstdint>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "advisor/behavior.hpp"
#include "advisor/env/registry.hpp"
#include "advisor/io.hpp"
#include "advisor/session.hpp"

namespace advisor {

/// JSON encoding of the session API. Numbers travel as decimal strings;
/// requests accept either strings or JSON numbers.
namespace api {

inline json render_json(const RenderState& r) {
  return {{"kind", r.kind},
          {"rows", std::to_string(r.rows)},
          {"cols", std::to_string(r.cols)},
          {"cells", r.cells},
          {"to_move", r.to_move},
          {"terminal", r.terminal}};
}

inline json legal_actions_json(const Environment& env, StateId s) {
  json out = json::array();
  if (env.mdp.is_terminal(s)) return out;
  for (ActionId a = 0; a < env.mdp.num_actions(s); ++a) {
    out.push_back({{"index", std::to_string(a)}, {"label", env.action_label(s, a)}});
  }
  return out;
}

inline const char* to_string(BudgetMode m) { return m == BudgetMode::count ? "count" : "frequency"; }

inline json state_record(const SessionSnapshot& snap, const Environment& env) {
  json out{{"session_id", snap.id},
           {"state", render_json(env.render(snap.state))},
           {"state_label", env.mdp.state_name(snap.state)},
           {"state_version", std::to_string(snap.version)},
           {"legal_actions", legal_actions_json(env, snap.state)},
           {"status", snap.finished ? "finished" : "active"},
           {"reward_so_far", to_decimal(snap.outcome)}};
  if (snap.finished) out["outcome"] = to_decimal(snap.outcome);
  return out;
}

inline json advice_json(const std::optional<Advice>& advice, const Environment& env) {
  if (!advice) return json::object();
  const StateId s = advice->state;
  json deltas = json::array();
  for (ActionId a = 0; a < advice->deltas.size(); ++a) {
    deltas.push_back({{"action", std::to_string(a)}, {"label", env.action_label(s, a)}, {"delta", to_decimal(advice->deltas[a])}});
  }
  return {{"would_intervene", advice->would_intervene},
          {"recommended_action", {{"index", std::to_string(advice->recommended)}, {"label", env.action_label(s, advice->recommended)}}},
          {"deltas", deltas},
          {"budget_remaining", to_decimal(advice->budget_remaining)}};
}

inline json summary_json(const SessionSnapshot& snap, const Environment& env) {
  json steps = json::array();
  for (const auto& st : snap.history) {
    steps.push_back({{"state", env.mdp.state_name(st.state)},
                     {"state_id", std::to_string(st.state)},
                     {"action", std::to_string(st.action)},
                     {"action_label", env.action_label(st.state, st.action)},
                     {"reward", to_decimal(st.reward)},
                     {"advised", st.advised},
                     {"accepted", st.accepted},
                     {"intervened", st.intervened},
                     {"delta", to_decimal(st.delta)}});
  }
  json out{{"session_id", snap.id},
           {"env", snap.env},
           {"skill", snap.skill},
           {"strategy", snap.strategy == Strategy::human ? "none" : advisor::to_string(snap.strategy)},
           {"budget_mode", to_string(snap.mode)},
           {"budget", to_decimal(snap.budget)},
           {"seed", std::to_string(snap.seed)},
           {"start_state", env.mdp.state_name(snap.start)},
           {"final_state", env.mdp.state_name(snap.state)},
           {"final_state_id", std::to_string(snap.state)},
           {"status", snap.finished ? "finished" : "active"},
           {"steps", steps},
           {"interventions", std::to_string(snap.interventions())},
           {"intervention_frequency", to_decimal(snap.frequency())},
           {"reward_so_far", to_decimal(snap.outcome)}};
  if (snap.finished) out["outcome"] = to_decimal(snap.outcome);
  return out;
}

/// Rebuilds a Trajectory from a summary record (for the concepts pipeline).
inline Trajectory trajectory_from_summary(const json& summary) {
  Trajectory t;
  for (const auto& st : summary.at("steps")) {
    t.steps.push_back({std::stoull(st.at("state_id").get<std::string>()), std::stoull(st.at("action").get<std::string>()),
                       from_decimal(st.at("reward")), st.at("intervened").get<bool>()});
  }
  t.final_state = std::stoull(summary.at("final_state_id").get<std::string>());
  return t;
}

inline json catalogue_json() {
  json envs = json::array();
  for (const auto& id : shipped_environment_ids()) envs.push_back({{"id", id}});
  return {{"envs", envs},
          {"skills", {"L1", "L2", "L3", "L4", "L5"}},
          {"strategies",
           {{{"id", "none"}, {"label", "No assistant"}},
            {{"id", "expert"}, {"label", "Expert assistant"}},
            {{"id", "valuemax"}, {"label", "Valuemax assistant"}}}},
          {"budget_modes", {"count", "frequency"}}};
}

inline std::uint64_t parse_unsigned(const json& j, const char* field) {
  try {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_string()) {
      const auto text = j.get<std::string>();
      std::size_t used = 0;
      const auto v = std::stoull(text, &used);
      if (used == text.size() && !text.empty() && text[0] != '-') return v;
    }
  } catch (const std::exception&) {
  }
  throw SessionError("invalid_request", 400, std::string("field `") + field + "` must be a non-negative integer");
}

inline SessionRequest parse_create(const json& body) {
  SessionRequest req;
  try {
    req.env = body.at("env").get<std::string>();
    if (body.contains("skill")) req.skill = body["skill"].get<std::string>();
    if (body.contains("strategy")) req.strategy = body["strategy"].get<std::string>();
    const auto mode = body.value("budget_mode", std::string("count"));
    if (mode == "count") {
      req.mode = BudgetMode::count;
    } else if (mode == "frequency") {
      req.mode = BudgetMode::frequency;
    } else {
      throw SessionError("invalid_budget", 400, "budget_mode must be count or frequency");
    }
    if (body.contains("budget")) req.budget = from_decimal(body["budget"]);
    if (body.contains("seed") && !body["seed"].is_null()) req.seed = parse_unsigned(body["seed"], "seed");
    if (body.contains("start_from") && !body["start_from"].is_null()) req.start_from = body["start_from"].get<std::string>();
  } catch (const json::exception& e) {
    throw SessionError("invalid_request", 400, e.what());
  } catch (const config_error& e) {
    throw SessionError("invalid_request", 400, e.what());
  }
  return req;
}

}  // namespace api

/// Registers the session routes on an httplib server.
inline void register_routes(httplib::Server& server, SessionManager& sessions) {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](auto handler) {
    return [reply, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const SessionError& e) {
        reply(res, e.status(), {{"error", {{"code", e.code()}, {"message", e.what()}}}});
      } catch (const json::exception& e) {
        reply(res, 400, {{"error", {{"code", "invalid_request"}, {"message", e.what()}}}});
      } catch (const config_error& e) {
        reply(res, 400, {{"error", {{"code", "invalid_request"}, {"message", e.what()}}}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
      }
    };
  };

  server.Get("/envs", guarded([reply](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, api::catalogue_json());
             }));

  server.Post("/sessions", guarded([reply, &sessions](const httplib::Request& req, httplib::Response& res) {
                const auto snap = sessions.create(api::parse_create(json::parse(req.body)));
                reply(res, 201, api::state_record(snap, *sessions.get(snap.id)->instance().env));
              }));

  server.Get(R"(/sessions/([^/]+)/advice)",
             guarded([reply, &sessions](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto session = sessions.get(id);
               reply(res, 200, api::advice_json(session->advice(), *session->instance().env));
             }));

  server.Post(R"(/sessions/([^/]+)/step)",
              guarded([reply, &sessions](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto body = json::parse(req.body);
                if (!body.contains("action") || !body.contains("state_version")) {
                  throw SessionError("invalid_request", 400, "step needs `action` and `state_version`");
                }
                const auto action = api::parse_unsigned(body["action"], "action");
                const auto version = api::parse_unsigned(body["state_version"], "state_version");
                const bool accepted = body.value("accepted_advice", false);
                const auto snap = sessions.step(id, action, version, accepted);
                reply(res, 200, api::state_record(snap, *sessions.get(id)->instance().env));
              }));

  server.Get(R"(/sessions/([^/]+)/summary)",
             guarded([reply, &sessions](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto session = sessions.get(id);
               reply(res, 200, api::summary_json(session->snapshot(), *session->instance().env));
             }));
}

}  // namespace advisor
