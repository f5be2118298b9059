#include "kendama/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kendama::io {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> rows_of(const std::string& text, std::size_t columns, const char* what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(std::string(what) + ": missing header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != columns) {
      throw IoError(std::string(what) + ": expected " + std::to_string(columns) + " columns in row " +
                    std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw IoError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw IoError("bad number '" + s + "'");
  }
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "'");
  return v;
}

harness::Outcome outcome_from(const std::string& s) {
  using harness::Outcome;
  for (Outcome o : {Outcome::Catch, Outcome::Miss, Outcome::TrialFailureP1, Outcome::TrialFailureP2,
                    Outcome::ConstraintViolation}) {
    if (harness::to_string(o) == s) return o;
  }
  throw IoError("unknown outcome '" + s + "'");
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("summary field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string samples_csv(const std::vector<sets::Vec2>& samples) {
  std::string out = "v_x,v_z\n";
  for (const auto& v : samples) out += format_double(v.x()) + "," + format_double(v.y()) + "\n";
  return out;
}

std::vector<sets::Vec2> parse_samples_csv(const std::string& text) {
  std::vector<sets::Vec2> out;
  for (const auto& r : rows_of(text, 2, "samples")) out.emplace_back(to_double(r[0]), to_double(r[1]));
  return out;
}

std::string trace_csv(const std::vector<harness::TraceRow>& trace) {
  std::string out =
      "t,y_x,y_z,ehat_x,ehat_z,ebar_x,ebar_z,ubar_x,ubar_z,u_x,u_z,e_true_x,e_true_z,qp_status\n";
  for (const auto& r : trace) {
    out += std::to_string(r.t);
    for (const auto* v : {&r.y, &r.e_hat, &r.e_bar, &r.u_bar, &r.u, &r.e_true}) {
      out += "," + format_double(v->x()) + "," + format_double(v->y());
    }
    out += "," + r.qp_status + "\n";
  }
  return out;
}

static constexpr const char* kRecordHeader =
    "n,index,seed,e0_x,e0_z,outcome,p1,p2,violation,impacted,impact_step,impact_rel_vz,impact_ex,impact_ez,hit,"
    "hit_center,catch,est_tube_violations,con_tube_violations,input_violations";

std::string records_csv(const std::vector<harness::RolloutRecord>& records) {
  std::string out = std::string(kRecordHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.n) + "," + std::to_string(r.index) + "," + std::to_string(r.seed) + "," +
           format_double(r.e0.x()) + "," + format_double(r.e0.y()) + "," + harness::to_string(r.outcome) + "," +
           std::to_string(int(r.p1)) + "," + std::to_string(int(r.p2)) + "," + std::to_string(int(r.violation)) +
           "," + std::to_string(int(r.impacted)) + "," + std::to_string(r.impact_step) + "," +
           format_double(r.impact_rel_vz) + "," + format_double(r.impact_ex) + "," + format_double(r.impact_ez) + "," + std::to_string(int(r.hit)) +
           "," + std::to_string(int(r.hit_center)) + "," + std::to_string(int(r.caught)) + "," +
           std::to_string(r.est_tube_violations) + "," + std::to_string(r.con_tube_violations) + "," +
           std::to_string(r.input_violations) + "\n";
  }
  return out;
}

std::vector<harness::RolloutRecord> parse_records_csv(const std::string& text) {
  if (text.rfind(kRecordHeader, 0) != 0) throw IoError("records: unexpected header");
  std::vector<harness::RolloutRecord> out;
  for (const auto& c : rows_of(text, 20, "records")) {
    harness::RolloutRecord r;
    r.n = static_cast<std::size_t>(to_u64(c[0]));
    r.index = static_cast<int>(to_int(c[1]));
    r.seed = to_u64(c[2]);
    r.e0 = {to_double(c[3]), to_double(c[4])};
    r.outcome = outcome_from(c[5]);
    r.p1 = to_int(c[6]) != 0;
    r.p2 = to_int(c[7]) != 0;
    r.violation = to_int(c[8]) != 0;
    r.impacted = to_int(c[9]) != 0;
    r.impact_step = static_cast<int>(to_int(c[10]));
    r.impact_rel_vz = to_double(c[11]);
    r.impact_ex = to_double(c[12]);
    r.impact_ez = to_double(c[13]);
    r.hit = to_int(c[14]) != 0;
    r.hit_center = to_int(c[15]) != 0;
    r.caught = to_int(c[16]) != 0;
    r.est_tube_violations = static_cast<int>(to_int(c[17]));
    r.con_tube_violations = static_cast<int>(to_int(c[18]));
    r.input_violations = static_cast<int>(to_int(c[19]));
    out.push_back(r);
  }
  return out;
}

std::string input_sequence_csv(const swingup::SwingupSolution& sol, double Ts) {
  std::string out = "i,t,F_x,F_z,tau\n";
  for (std::size_t i = 0; i < sol.F_star.size(); ++i) {
    const auto& F = sol.F_star[i];
    out += std::to_string(i) + "," + format_double(static_cast<double>(i) * Ts) + "," + format_double(F(0)) + "," +
           format_double(F(1)) + "," + format_double(F(2)) + "\n";
  }
  return out;
}

std::string state_trajectory_csv(const swingup::SwingupSolution& sol, double Ts) {
  std::string out = "i,t,x,z,phi,x_dot,z_dot,phi_dot\n";
  for (std::size_t i = 0; i < sol.x_traj.size(); ++i) {
    out += std::to_string(i) + "," + format_double(static_cast<double>(i) * Ts);
    for (int k = 0; k < 6; ++k) out += "," + format_double(sol.x_traj[i](k));
    out += "\n";
  }
  return out;
}

json to_json(const harness::NSummary& s) {
  return {{"n", s.n},
          {"epsilon_used", s.epsilon_used},
          {"escalations", s.escalations},
          {"vhat", sets::to_json(s.vhat)},
          {"sets_empty", s.sets_empty},
          {"rollouts", s.rollouts},
          {"catches", s.catches},
          {"misses", s.misses},
          {"p1", s.p1},
          {"p2", s.p2},
          {"violations", s.violations},
          {"impacts", s.impacts},
          {"hits", s.hits},
          {"hit_center", s.hit_center},
          {"catch_pct", s.pct(s.catches)},
          {"hit_center_pct", s.pct(s.hit_center)},
          {"trial_failure_pct", s.pct(s.p1 + s.p2 + s.violations)},
          {"impact_vz", {{"count", s.impact_vz.count}, {"mean", s.impact_vz.mean}, {"std", s.impact_vz.std}}}};
}

json to_json(const harness::SweepSummary& s) {
  json per_n = json::array();
  for (const auto& n : s.per_n) per_n.push_back(to_json(n));
  const auto& t = s.trend;
  return {{"per_n", per_n},
          {"trend",
           {{"spearman_rho", t.spearman_rho},
            {"p_value", t.p_value},
            {"catch_gain_pp", t.catch_gain_pp},
            {"hit_center_gain_pp", t.hit_center_gain_pp},
            {"impact_vz_change", t.impact_vz_change}}}};
}

harness::SweepSummary sweep_summary_from_json(const json& j) {
  harness::SweepSummary s;
  const auto per_n = field<json>(j, "per_n");
  if (!per_n.is_array() || per_n.empty()) throw IoError("summary field 'per_n' must be a non-empty array");
  for (const auto& e : per_n) {
    harness::NSummary n;
    n.n = field<std::size_t>(e, "n");
    n.rollouts = field<int>(e, "rollouts");
    n.catches = field<int>(e, "catches");
    n.hit_center = field<int>(e, "hit_center");
    const auto vz = field<json>(e, "impact_vz");
    n.impact_vz.count = field<int>(vz, "count");
    n.impact_vz.mean = field<double>(vz, "mean");
    n.impact_vz.std = field<double>(vz, "std");
    n.misses = e.value("misses", 0);
    n.p1 = e.value("p1", 0);
    n.p2 = e.value("p2", 0);
    n.violations = e.value("violations", 0);
    n.impacts = e.value("impacts", 0);
    n.hits = e.value("hits", 0);
    n.epsilon_used = e.value("epsilon_used", 0.0);
    n.escalations = e.value("escalations", 0);
    n.sets_empty = e.value("sets_empty", false);
    if (e.contains("vhat")) {
      const auto v = sets::convex_set_from_json(e["vhat"]);
      if (std::holds_alternative<sets::Box>(v)) n.vhat = std::get<sets::Box>(v);
    }
    s.per_n.push_back(n);
  }
  s.trend = harness::trend_stats(s.per_n);
  return s;
}

}  // namespace kendama::io
