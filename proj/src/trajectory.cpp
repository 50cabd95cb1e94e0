#include "crowdnav/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "crowdnav/pedestrians.hpp"
#include "crowdnav/text.hpp"

namespace crowdnav {

namespace {

constexpr const char* kHeader = "# crowdnav-trajectory 1";
constexpr const char* kColumns = "# columns tick agent kind x y theta v w flags";

const char* kind_name(AgentKind k) { return k == AgentKind::robot ? "robot" : "pedestrian"; }

}  // namespace

TrajectoryParseError::TrajectoryParseError(int line_no, const std::string& what)
    : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}

int Trajectory::tick_count() const {
  std::set<int> ticks;
  for (const TrajectoryRow& r : rows) ticks.insert(r.tick);
  return static_cast<int>(ticks.size());
}

std::vector<TrajectoryRow> Trajectory::agent_rows(AgentKind kind, int agent) const {
  std::vector<TrajectoryRow> out;
  for (const TrajectoryRow& r : rows) {
    if (r.kind == kind && r.agent == agent) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TrajectoryRow& a, const TrajectoryRow& b) { return a.tick < b.tick; });
  return out;
}

int Trajectory::agent_count(AgentKind kind) const {
  int n = 0;
  for (const TrajectoryRow& r : rows) {
    if (r.kind == kind) n = std::max(n, r.agent + 1);
  }
  return n;
}

std::string serialize_trajectory(const Trajectory& t) {
  std::ostringstream os;
  os << kHeader << '\n';
  os << "# " << t.scenario.to_line() << '\n';
  os << "# method=" << t.method << '\n';
  os << "# dt=" << format_real(t.dt) << '\n';
  for (const StaticObstacle& o : t.obstacles) {
    if (const auto* r = std::get_if<Rect>(&o.shape)) {
      os << "# obstacle rect " << format_real(r->center.x) << ' ' << format_real(r->center.y) << ' '
         << format_real(r->half_extents.x) << ' ' << format_real(r->half_extents.y) << '\n';
    } else {
      const auto& c = std::get<Circle>(o.shape);
      os << "# obstacle circle " << format_real(c.center.x) << ' ' << format_real(c.center.y) << ' '
         << format_real(c.radius) << '\n';
    }
  }
  for (std::size_t i = 0; i < t.goals.size(); ++i) {
    const Pose2D& g = t.goals[i];
    os << "# goal " << i << ' ' << format_real(g.x) << ' ' << format_real(g.y) << ' '
       << format_real(g.theta) << '\n';
  }
  os << kColumns << '\n';
  for (const TrajectoryRow& r : t.rows) {
    os << r.tick << ' ' << r.agent << ' ' << kind_name(r.kind) << ' ' << format_real(r.x) << ' '
       << format_real(r.y) << ' ' << format_real(r.theta) << ' ' << format_real(r.v) << ' '
       << format_real(r.w) << ' ' << r.flags << '\n';
  }
  return os.str();
}

Trajectory parse_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool saw_scenario = false;
  auto real = [&](const std::string& s) {
    const auto v = parse_real(s);
    if (!v) throw TrajectoryParseError(line_no, "expected a number, got '" + s + "'");
    return *v;
  };
  auto integer = [&](const std::string& s) {
    const auto v = parse_int(s);
    if (!v) throw TrajectoryParseError(line_no, "expected an integer, got '" + s + "'");
    return static_cast<int>(*v);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const std::string body(trim(std::string_view(line).substr(1)));
      const std::vector<std::string> tok = split_ws(body);
      if (!saw_header) {
        if (line != kHeader) throw TrajectoryParseError(line_no, "missing trajectory header");
        saw_header = true;
        continue;
      }
      if (tok.empty()) continue;
      if (tok[0].rfind("scenario=", 0) == 0) {
        try {
          t.scenario = ScenarioId::parse(body);
        } catch (const std::exception& e) {
          throw TrajectoryParseError(line_no, e.what());
        }
        saw_scenario = true;
      } else if (tok[0].rfind("method=", 0) == 0) {
        t.method = tok[0].substr(7);
      } else if (tok[0].rfind("dt=", 0) == 0) {
        t.dt = real(tok[0].substr(3));
        if (!(t.dt > 0.0)) throw TrajectoryParseError(line_no, "dt must be positive");
      } else if (tok[0] == "obstacle") {
        if (tok.size() == 6 && tok[1] == "rect") {
          t.obstacles.push_back({Rect{{real(tok[2]), real(tok[3])}, {real(tok[4]), real(tok[5])}}});
        } else if (tok.size() == 5 && tok[1] == "circle") {
          t.obstacles.push_back({Circle{{real(tok[2]), real(tok[3])}, real(tok[4])}});
        } else {
          throw TrajectoryParseError(line_no, "malformed obstacle line");
        }
      } else if (tok[0] == "goal") {
        if (tok.size() != 5) throw TrajectoryParseError(line_no, "malformed goal line");
        if (integer(tok[1]) != static_cast<int>(t.goals.size())) {
          throw TrajectoryParseError(line_no, "goals must be listed in robot order");
        }
        t.goals.push_back({real(tok[2]), real(tok[3]), real(tok[4])});
      } else if (tok[0] == "columns") {
        continue;
      } else {
        throw TrajectoryParseError(line_no, "unknown header line");
      }
      continue;
    }
    if (!saw_header) throw TrajectoryParseError(line_no, "missing trajectory header");
    const std::vector<std::string> tok = split_ws(line);
    if (tok.size() != 9) {
      throw TrajectoryParseError(line_no, "expected 9 columns, got " + std::to_string(tok.size()));
    }
    TrajectoryRow r;
    r.tick = integer(tok[0]);
    r.agent = integer(tok[1]);
    if (r.tick < 0 || r.agent < 0) throw TrajectoryParseError(line_no, "negative tick or agent");
    if (tok[2] == "robot") {
      r.kind = AgentKind::robot;
    } else if (tok[2] == "pedestrian") {
      r.kind = AgentKind::pedestrian;
    } else {
      throw TrajectoryParseError(line_no, "unknown agent kind '" + tok[2] + "'");
    }
    r.x = real(tok[3]);
    r.y = real(tok[4]);
    r.theta = real(tok[5]);
    r.v = real(tok[6]);
    r.w = real(tok[7]);
    r.flags = tok[8];
    t.rows.push_back(std::move(r));
  }
  if (!saw_header) throw TrajectoryParseError(line_no + 1, "empty trajectory file");
  if (!saw_scenario) throw TrajectoryParseError(line_no + 1, "missing scenario line");
  return t;
}

Trajectory parse_trajectory_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trajectory(in);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory " + path);
  return parse_trajectory(in);
}

void save_trajectory(const std::string& path, const Trajectory& t) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << serialize_trajectory(t);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void record_tick(Trajectory& t, int tick, const WorldState& world, const WorldState* previous,
                 const std::vector<Action>& robot_actions, const std::vector<Outcome>& outcomes) {
  for (std::size_t i = 0; i < world.robots.size(); ++i) {
    const AgentBody& b = world.robots[i];
    const Action a = i < robot_actions.size() ? robot_actions[i] : Action{};
    t.rows.push_back({tick, static_cast<int>(i), AgentKind::robot, b.pose.x, b.pose.y, b.pose.theta,
                      a.v, a.w, to_string(i < outcomes.size() ? outcomes[i] : Outcome::running)});
  }
  for (std::size_t i = 0; i < world.pedestrians.size(); ++i) {
    const AgentBody& b = world.pedestrians[i].body;
    double w = 0.0;
    if (previous != nullptr && i < previous->pedestrians.size() && t.dt > 0.0) {
      w = normalize_angle(b.pose.theta - previous->pedestrians[i].body.pose.theta) / t.dt;
    }
    t.rows.push_back({tick, static_cast<int>(i), AgentKind::pedestrian, b.pose.x, b.pose.y,
                      b.pose.theta, norm(b.velocity), w, "-"});
  }
}

WorldState reconstruct_world(const Trajectory& t, int tick) {
  WorldState w;
  w.obstacles = t.obstacles;
  w.time = tick * t.dt;
  const int n_robots = t.agent_count(AgentKind::robot);
  const int n_peds = t.agent_count(AgentKind::pedestrian);
  bool found = false;
  for (int i = 0; i < n_robots; ++i) {
    AgentBody b;
    b.kind = AgentKind::robot;
    b.radius = kRobotRadius;
    for (const TrajectoryRow& r : t.agent_rows(AgentKind::robot, i)) {
      if (r.tick > tick) break;
      b.pose = {r.x, r.y, r.theta};
      b.velocity = unit_from_angle(r.theta) * r.v;
      found = found || r.tick == tick;
    }
    w.robots.push_back(b);
  }
  for (int i = 0; i < n_peds; ++i) {
    Pedestrian p;
    p.id = i;
    p.body.kind = AgentKind::pedestrian;
    p.body.radius = kPedestrianRadius;
    bool first = true;
    for (const TrajectoryRow& r : t.agent_rows(AgentKind::pedestrian, i)) {
      if (r.tick > tick) break;
      p.body.pose = {r.x, r.y, r.theta};
      p.body.velocity = unit_from_angle(r.theta) * r.v;
      // Tick 0 starts the gait at phase zero; later ticks advance it by the
      // distance walked during that step.
      p.legs = first ? leg_disks(p.gait, p.body) : update_gait(p.gait, p.body, t.dt);
      first = false;
      found = found || r.tick == tick;
    }
    w.pedestrians.push_back(p);
  }
  if (!found && !t.rows.empty()) {
    throw std::out_of_range("tick " + std::to_string(tick) + " not present in trajectory");
  }
  return w;
}

std::string render_svg(const Trajectory& t) {
  const Bounds b;
  const double scale = 50.0;  // px per metre
  const double w = (b.max_x - b.min_x) * scale;
  const double h = (b.max_y - b.min_y) * scale;
  auto px = [&](double x) { return format_real((x - b.min_x) * scale); };
  auto py = [&](double y) { return format_real((b.max_y - y) * scale); };
  auto len = [&](double d) { return format_real(d * scale); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_real(w) << "\" height=\""
     << format_real(h) << "\" viewBox=\"0 0 " << format_real(w) << ' ' << format_real(h) << "\">\n";
  os << "<title>" << t.scenario.to_line() << " method=" << t.method << "</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << format_real(w) << "\" height=\"" << format_real(h)
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const StaticObstacle& o : t.obstacles) {
    if (const auto* r = std::get_if<Rect>(&o.shape)) {
      os << "<rect class=\"obstacle\" x=\"" << px(r->center.x - r->half_extents.x) << "\" y=\""
         << py(r->center.y + r->half_extents.y) << "\" width=\"" << len(2 * r->half_extents.x)
         << "\" height=\"" << len(2 * r->half_extents.y) << "\" fill=\"#555\"/>\n";
    } else {
      const auto& c = std::get<Circle>(o.shape);
      os << "<circle class=\"obstacle\" cx=\"" << px(c.center.x) << "\" cy=\"" << py(c.center.y)
         << "\" r=\"" << len(c.radius) << "\" fill=\"#555\"/>\n";
    }
  }
  for (std::size_t i = 0; i < t.goals.size(); ++i) {
    os << "<circle class=\"goal\" data-robot=\"" << i << "\" cx=\"" << px(t.goals[i].x)
       << "\" cy=\"" << py(t.goals[i].y) << "\" r=\"" << len(0.3)
       << "\" fill=\"none\" stroke=\"green\" stroke-dasharray=\"4 2\"/>\n";
  }
  const char* robot_colors[] = {"#d62728", "#1f77b4", "#9467bd", "#ff7f0e", "#2ca02c"};
  for (const AgentKind kind : {AgentKind::pedestrian, AgentKind::robot}) {
    const int n = t.agent_count(kind);
    for (int i = 0; i < n; ++i) {
      const std::vector<TrajectoryRow> rows = t.agent_rows(kind, i);
      const std::string color = kind == AgentKind::robot ? robot_colors[i % 5] : "#999";
      os << "<polyline class=\"path\" data-kind=\"" << kind_name(kind) << "\" data-agent=\"" << i
         << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < rows.size(); ++k) {
        os << (k ? " " : "") << px(rows[k].x) << ',' << py(rows[k].y);
      }
      os << "\"/>\n";
      if (!rows.empty()) {
        const double r = kind == AgentKind::robot ? kRobotRadius : kPedestrianRadius;
        os << "<circle class=\"final\" cx=\"" << px(rows.back().x) << "\" cy=\"" << py(rows.back().y)
           << "\" r=\"" << len(r) << "\" fill=\"" << color << "\" fill-opacity=\"0.4\"/>\n";
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace crowdnav
