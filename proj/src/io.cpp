#include "qcl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qcl::io {

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : InputError(line ? what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"
                      : what),
      line_(line), column_(column) {}

namespace {

void location(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& column) {
  line = 1;
  column = 1;
  for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw ParseError(std::string("expected an object holding \"") + key + "\"");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field \"") + key + "\"");
  return *it;
}

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
  return j.get<double>();
}

long long integer(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw ParseError(std::string(what) + " must be an integer");
  return j.get<long long>();
}

Json number_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_number(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return number(*it, key);
}

Json vector_json(const VectorX<double>& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorX<double> vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  VectorX<double> v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Index>(k)) = number(j[k], what);
  return v;
}

const char* role_name(AgentRole r) {
  switch (r) {
  case AgentRole::off_surface: return "off";
  case AgentRole::held: return "held";
  case AgentRole::departing_up: return "up";
  case AgentRole::departing_down: return "down";
  }
  return "?";
}

AgentRole role_from(const std::string& s) {
  for (auto r : {AgentRole::off_surface, AgentRole::held, AgentRole::departing_up, AgentRole::departing_down})
    if (s == role_name(r)) return r;
  throw ParseError("unknown agent role \"" + s + "\"");
}

const char* termination_name(Termination t) {
  switch (t) {
  case Termination::equilibrium: return "equilibrium";
  case Termination::horizon: return "horizon";
  case Termination::stopped: return "stopped";
  }
  return "?";
}

void dump_to(std::string& out, const Json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
  case Json::value_t::number_float: {
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      out += "null";
      break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    out += s;
    break;
  }
  case Json::value_t::array: {
    if (j.empty()) {
      out += "[]";
      break;
    }
    // numeric arrays stay on one line
    const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
    out += '[';
    bool first = true;
    for (const auto& e : j) {
      if (!first) out += flat || indent < 0 ? ", " : ",";
      first = false;
      if (!flat) newline(depth + 1);
      dump_to(out, e, indent, depth + 1);
    }
    if (!flat) newline(depth);
    out += ']';
    break;
  }
  case Json::value_t::object: {
    if (j.empty()) {
      out += "{}";
      break;
    }
    // small records nested inside lists (edges, alphas) stay on one line
    const bool flat = depth > 0 && j.size() <= 4 &&
                      std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += flat ? ", " : ",";
      first = false;
      if (!flat) newline(depth + 1);
      out += Json(it.key()).dump();
      out += indent < 0 ? ":" : ": ";
      dump_to(out, it.value(), indent, depth + 1);
    }
    if (!flat) newline(depth);
    out += '}';
    break;
  }
  default:
    out += j.dump();
  }
}

} // namespace

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 0, column = 0;
    location(text, e.byte, line, column);
    // drop the library's own "[id] parse error at ...: " prefix
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos)
      if (auto c = msg.find(": ", p); c != std::string::npos) msg = msg.substr(c + 2);
    throw ParseError((source.empty() ? "" : source + ": ") + "malformed JSON: " + msg, line, column);
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

std::string dump(const Json& j, int indent) {
  std::string out;
  dump_to(out, j, indent, 0);
  return out;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << dump(j) << '\n';
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// --- schedules and quantizers ---------------------------------------------

Json to_json(const GraphSchedule<double>& s) {
  Json segs = Json::array();
  for (const auto& seg : s.segments()) {
    Json edges = Json::array();
    for (Index i = 0; i < seg.graph.size(); ++i)
      for (Index j = 0; j < seg.graph.size(); ++j)
        if (seg.graph.has_edge(i, j)) edges.push_back({{"i", i}, {"j", j}, {"w", seg.graph.weight(i, j)}});
    segs.push_back({{"t", seg.start}, {"edges", edges}});
  }
  return {{"n", s.n()},
          {"segments", segs},
          {"period", number_or_null(s.period())},
          {"a_low", s.a_low()},
          {"a_high", s.a_high()}};
}

GraphSchedule<double> schedule_from_json(const Json& j) {
  const long long n = integer(field(j, "n"), "n");
  if (n < 1) throw ParseError("schedule needs n >= 1");
  const Json& segs = field(j, "segments");
  if (!segs.is_array()) throw ParseError("segments must be an array");
  std::vector<ScheduleSegment<double>> out;
  for (const auto& seg : segs) {
    WeightedDigraph<double> g(static_cast<Index>(n));
    const Json& edges = field(seg, "edges");
    if (!edges.is_array()) throw ParseError("edges must be an array");
    for (const auto& e : edges) {
      const long long i = integer(field(e, "i"), "edge endpoint i");
      const long long k = integer(field(e, "j"), "edge endpoint j");
      if (i < 0 || k < 0 || i >= n || k >= n) throw ParseError("edge endpoint out of range");
      if (i == k) throw ParseError("self-loops are not allowed");
      g.set_weight(i, k, number(field(e, "w"), "edge weight"));
    }
    out.push_back({number(field(seg, "t"), "segment start"), std::move(g)});
  }
  return GraphSchedule<double>(std::move(out), optional_number(j, "period"),
                               number(field(j, "a_low"), "a_low"), number(field(j, "a_high"), "a_high"));
}

Json to_json(const Quantizer<double>& q) {
  if (q.is_uniform()) return {{"type", "uniform"}, {"delta", q.delta()}};
  return {{"type", "general"}, {"levels", q.levels()}, {"thresholds", q.thresholds()}};
}

Quantizer<double> quantizer_from_json(const Json& j) {
  const Json& type = field(j, "type");
  if (type == "uniform") return Quantizer<double>::uniform(number(field(j, "delta"), "delta"));
  if (type == "general") {
    auto list = [&](const char* key) {
      const VectorX<double> v = vector_from(field(j, key), key);
      return std::vector<double>(v.data(), v.data() + v.size());
    };
    return Quantizer<double>::general(list("levels"), list("thresholds"));
  }
  throw ParseError("unknown quantizer type " + type.dump());
}

// --- policies, expectations, scenarios ------------------------------------

std::string policy_name(const SelectionPolicy<double>& p) {
  if (std::holds_alternative<SlidingPolicy>(p)) return "sliding";
  if (std::holds_alternative<SequentialSlowPolicy>(p)) return "sequential_slow";
  return "fixed_alpha";
}

Json to_json(const SelectionPolicy<double>& p) {
  Json j = {{"type", policy_name(p)}};
  if (const auto* f = std::get_if<FixedAlphaPolicy<double>>(&p)) {
    Json a = Json::array();
    for (const auto& [i, alpha] : f->alpha) a.push_back({{"i", i}, {"alpha", alpha}});
    j["alpha"] = a;
  }
  return j;
}

SelectionPolicy<double> policy_from_json(const Json& j) {
  const Json& type = j.is_string() ? j : field(j, "type");
  if (type == "sliding") return SlidingPolicy{};
  if (type == "sequential_slow") return SequentialSlowPolicy{};
  if (type == "fixed_alpha") {
    FixedAlphaPolicy<double> f;
    if (j.is_object() && j.contains("alpha"))
      for (const auto& e : j["alpha"])
        f.alpha[integer(field(e, "i"), "alpha agent")] = number(field(e, "alpha"), "alpha");
    return f;
  }
  throw ParseError("unknown policy type " + type.dump());
}

Json to_json(const Expectation& e) {
  Json alpha = Json::array();
  for (const auto& [i, a] : e.alpha) alpha.push_back({{"i", i}, {"alpha", a}});
  return {{"t_con", number_or_null(e.t_con)},
          {"t_con_lower_bound", number_or_null(e.t_con_lower_bound)},
          {"t_con_alt", number_or_null(e.t_con_alt)},
          {"q_infinity", number_or_null(e.q_infinity)},
          {"sliding_speed", number_or_null(e.sliding_speed)},
          {"alpha", alpha},
          {"collocation", e.collocation}};
}

Expectation expectation_from_json(const Json& j) {
  Expectation e;
  e.t_con = optional_number(j, "t_con");
  e.t_con_lower_bound = optional_number(j, "t_con_lower_bound");
  e.t_con_alt = optional_number(j, "t_con_alt");
  e.q_infinity = optional_number(j, "q_infinity");
  e.sliding_speed = optional_number(j, "sliding_speed");
  if (auto it = j.find("alpha"); it != j.end())
    for (const auto& a : *it) e.alpha.emplace_back(integer(field(a, "i"), "alpha agent"), number(field(a, "alpha"), "alpha"));
  if (auto it = j.find("collocation"); it != j.end() && it->is_boolean()) e.collocation = it->get<bool>();
  return e;
}

Json to_json(const ScenarioConfig& cfg) {
  Json j = {{"name", cfg.name},
            {"schedule", to_json(cfg.schedule)},
            {"quantizer", to_json(cfg.quantizer)},
            {"x0", vector_json(cfg.x0)},
            {"policy", to_json(cfg.policy)},
            {"horizon", cfg.horizon},
            {"max_events", cfg.max_events}};
  j["expected"] = cfg.expected ? to_json(*cfg.expected) : Json(nullptr);
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig cfg;
  if (auto it = j.find("name"); it != j.end() && it->is_string()) cfg.name = it->get<std::string>();
  cfg.schedule = schedule_from_json(field(j, "schedule"));
  if (j.contains("quantizer")) cfg.quantizer = quantizer_from_json(j["quantizer"]);
  cfg.x0 = vector_from(field(j, "x0"), "x0");
  if (cfg.x0.size() != cfg.schedule.n()) throw ParseError("x0 length differs from the schedule's n");
  if (j.contains("policy")) cfg.policy = policy_from_json(j["policy"]);
  if (auto h = optional_number(j, "horizon")) {
    if (!(*h > 0.0)) throw ParseError("horizon must be positive");
    cfg.horizon = *h;
  }
  if (auto it = j.find("max_events"); it != j.end() && !it->is_null()) {
    const long long m = integer(*it, "max_events");
    if (m < 1) throw ParseError("max_events must be positive");
    cfg.max_events = static_cast<std::size_t>(m);
  }
  if (auto it = j.find("expected"); it != j.end() && it->is_object()) cfg.expected = expectation_from_json(*it);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    return scenario_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// --- trajectories ---------------------------------------------------------

Json to_json(const Trajectory<double>& traj) {
  Json events = Json::array();
  for (const auto& e : traj.events) {
    Json kinds = Json::array(), alpha = Json::array(), roles = Json::array(), agents = Json::array();
    for (auto k : e.kinds) kinds.push_back(to_string(k));
    for (const auto& m : e.mode) alpha.push_back(m ? Json(m->alpha) : Json(nullptr));
    for (auto r : e.role) roles.push_back(role_name(r));
    for (auto i : e.agents) agents.push_back(i);
    events.push_back({{"t", e.t},
                      {"event", kinds},
                      {"x", vector_json(e.x)},
                      {"z", vector_json(e.z)},
                      {"alpha", alpha},
                      {"velocity", vector_json(e.velocity)},
                      {"role", roles},
                      {"agents", agents}});
  }
  return {{"n", traj.n()}, {"termination", termination_name(traj.termination)}, {"events", events}};
}

Trajectory<double> trajectory_from_json(const Json& j, const Quantizer<double>& q) {
  Trajectory<double> traj;
  const Json& term = field(j, "termination");
  bool known = false;
  for (auto t : {Termination::equilibrium, Termination::horizon, Termination::stopped})
    if (term == termination_name(t)) {
      traj.termination = t;
      known = true;
    }
  if (!known) throw ParseError("unknown termination " + term.dump());
  for (const auto& ev : field(j, "events")) {
    TrajectoryEvent<double> e;
    e.t = number(field(ev, "t"), "event time");
    for (const auto& k : field(ev, "event")) {
      auto kind = k.is_string() ? event_kind_from_string(k.get<std::string>()) : std::nullopt;
      if (!kind) throw ParseError("unknown event kind " + k.dump());
      e.kinds.push_back(*kind);
    }
    e.x = vector_from(field(ev, "x"), "x");
    e.z = vector_from(field(ev, "z"), "z");
    e.velocity = vector_from(field(ev, "velocity"), "velocity");
    const Index n = e.x.size();
    if (e.z.size() != n || e.velocity.size() != n) throw ParseError("event vectors differ in length");
    e.mode = make_state(e.t, e.x, q).mode;
    const Json& alpha = field(ev, "alpha");
    for (Index i = 0; i < n && i < static_cast<Index>(alpha.size()); ++i)
      if (e.mode[i] && alpha[i].is_number()) e.mode[i]->alpha = alpha[i].get<double>();
    for (const auto& r : field(ev, "role")) e.role.push_back(role_from(r.get<std::string>()));
    if (static_cast<Index>(e.role.size()) != n) throw ParseError("role list length differs from n");
    if (auto it = ev.find("agents"); it != ev.end())
      for (const auto& a : *it) e.agents.push_back(integer(a, "agent"));
    traj.events.push_back(std::move(e));
  }
  if (traj.events.empty()) throw ParseError("trajectory has no events");
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory<double>& traj, std::optional<double> stride) {
  const Index n = traj.n();
  out << "t,event";
  for (const char* col : {"x", "z", "alpha"})
    for (Index i = 1; i <= n; ++i) out << ',' << col << '_' << i;
  out << '\n';

  auto row = [&](double t, const std::string& label, const VectorX<double>& x,
                 const TrajectoryEvent<double>& seg, bool at_event) {
    out << format_double(t) << ',' << label;
    for (Index i = 0; i < n; ++i) out << ',' << format_double(x(i));
    for (Index i = 0; i < n; ++i) out << ',' << format_double(seg.z(i));
    for (Index i = 0; i < n; ++i) {
      out << ',';
      if (at_event && seg.mode[i]) out << format_double(seg.mode[i]->alpha);
    }
    out << '\n';
  };

  const bool sample = stride && *stride > 0.0;
  long long next_sample = 1;
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const auto& e = traj.events[k];
    std::string label;
    for (std::size_t m = 0; m < e.kinds.size(); ++m) label += (m ? "+" : "") + std::string(to_string(e.kinds[m]));
    row(e.t, label, e.x, e, true);
    if (!sample || k + 1 == traj.events.size()) continue;
    const double t_end = traj.events[k + 1].t;
    for (;;) {
      const double ts = static_cast<double>(next_sample) * *stride;
      if (ts >= t_end) break;
      ++next_sample;
      if (ts <= e.t) continue;
      row(ts, "sample", e.x + e.velocity * (ts - e.t), e, false);
    }
  }
}

Json to_json(const ConvergenceReport& r) {
  return {{"converged", r.converged},
          {"t_con", number_or_null(r.t_con)},
          {"s_star", number_or_null(r.s_star)},
          {"s_star_upper", number_or_null(r.s_star_upper)},
          {"q_infinity", number_or_null(r.q_infinity)},
          {"bound", number_or_null(r.bound)},
          {"average_drift", r.average_drift},
          {"envelope_ok", r.envelope_ok},
          {"envelope_violations", r.envelope_violations}};
}

} // namespace qcl::io
