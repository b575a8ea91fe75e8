#include "hdvplan/io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "hdvplan/errors.hpp"
#include "hdvplan/format.hpp"
#include "json.hpp"
#include "text.hpp"

namespace hdvplan {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kTrajectoryHeader = "s,e_y,e_psi,beta1,e_y_aux,kappa,x,y,heading";

double json_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(std::string("vehicle: missing key '") + key + "'");
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ParseError(std::string("vehicle: '") + key + "' must be a number");
  return v.get<double>();
}

ojson number_or_null(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string dump(const ojson& doc) { return doc.dump(2) + "\n"; }

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << kTrajectoryHeader << '\n';
  const bool trailer = trajectory.kind == VehicleKind::tractor_trailer;
  for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
    const auto& z = trajectory.states[i];
    out << fmt_num(trajectory.s[i]) << ',' << fmt_num(z.e_y) << ',' << fmt_num(z.e_psi) << ',';
    if (trailer) out << fmt_num(z.beta1);
    out << ',' << fmt_num(z.e_y_aux) << ',';
    if (i < trajectory.kappa.size()) out << fmt_num(trajectory.kappa[i]);
    out << ',';
    if (i < trajectory.poses.size()) {
      const auto& p = trajectory.poses[i];
      out << fmt_num(p.x) << ',' << fmt_num(p.y) << ',' << fmt_num(p.heading);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file");
  if (detail::trim(line) != kTrajectoryHeader)
    throw ParseError(std::string("trajectory header must be '") + kTrajectoryHeader + "'");
  Trajectory t;
  std::optional<bool> trailer;
  std::size_t row = 1;
  bool saw_last = false;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    if (saw_last) throw ParseError("row " + std::to_string(row) + ": only the last row may omit kappa");
    const auto cells = detail::split(line, ',');
    if (cells.size() != 9) throw ParseError("row " + std::to_string(row) + ": expected 9 columns");
    const bool has_beta = !detail::trim(cells[3]).empty();
    if (trailer && *trailer != has_beta) throw ParseError("row " + std::to_string(row) + ": beta1 column mixes empty and set");
    trailer = has_beta;
    VehicleState z;
    t.s.push_back(detail::parse_number(cells[0], row, "s"));
    z.e_y = detail::parse_number(cells[1], row, "e_y");
    z.e_psi = detail::parse_number(cells[2], row, "e_psi");
    if (has_beta) z.beta1 = detail::parse_number(cells[3], row, "beta1");
    z.e_y_aux = detail::parse_number(cells[4], row, "e_y_aux");
    if (detail::trim(cells[5]).empty())
      saw_last = true;
    else
      t.kappa.push_back(detail::parse_number(cells[5], row, "kappa"));
    t.poses.push_back({detail::parse_number(cells[6], row, "x"), detail::parse_number(cells[7], row, "y"),
                       detail::parse_number(cells[8], row, "heading")});
    t.states.push_back(z);
  }
  if (t.states.empty()) throw ParseError("trajectory has no rows");
  if (t.kappa.size() + 1 != t.states.size()) throw ParseError("trajectory: the last row (and only it) must omit kappa");
  t.kind = trailer.value_or(false) ? VehicleKind::tractor_trailer : VehicleKind::bus;
  return t;
}

VehicleParams parse_vehicle_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vehicle: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("vehicle: expected a JSON object");
  const std::string kind = doc.value("kind", std::string("bus"));
  std::set<std::string> allowed{"kind", "L1", "L1f", "L1r", "W", "kappa_max", "kappa_rate_max"};
  if (kind == "tractor_trailer") allowed.insert({"L2", "L2r", "M1", "W_trailer"});
  else if (kind != "bus") throw ParseError("vehicle: unknown kind '" + kind + "'");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw ParseError("vehicle: unknown key '" + key + "'");

  BusParams bus;
  bus.L1 = json_number(doc, "L1");
  bus.L1f = json_number(doc, "L1f");
  bus.L1r = json_number(doc, "L1r");
  bus.W = json_number(doc, "W");
  bus.kappa_max = json_number(doc, "kappa_max");
  bus.kappa_rate_max = json_number(doc, "kappa_rate_max");
  if (kind == "bus") {
    bus.validate();
    return bus;
  }
  TractorTrailerParams tt;
  tt.tractor = bus;
  tt.L2 = json_number(doc, "L2");
  tt.L2r = json_number(doc, "L2r");
  tt.M1 = json_number(doc, "M1");
  tt.W_trailer = doc.contains("W_trailer") ? json_number(doc, "W_trailer") : bus.W;
  tt.validate();
  return tt;
}

std::string vehicle_json(const VehicleParams& params) {
  const auto& b = tractor_of(params);
  ojson doc;
  doc["kind"] = to_string(kind_of(params));
  doc["L1"] = b.L1;
  doc["L1f"] = b.L1f;
  doc["L1r"] = b.L1r;
  doc["W"] = b.W;
  doc["kappa_max"] = b.kappa_max;
  doc["kappa_rate_max"] = b.kappa_rate_max;
  if (const auto* tt = std::get_if<TractorTrailerParams>(&params)) {
    doc["L2"] = tt->L2;
    doc["L2r"] = tt->L2r;
    doc["M1"] = tt->M1;
    doc["W_trailer"] = tt->W_trailer;
  }
  return dump(doc);
}

std::string geometric_solution_json(const GeometricSolution& s) {
  ojson doc;
  doc["kind"] = to_string(s.kind);
  doc["R_road"] = s.R_road;
  doc["R1"] = s.R1;
  doc["R2"] = number_or_null(s.R2);
  doc["R_left"] = s.R_left;
  doc["R_right"] = s.R_right;
  doc["e_y"] = s.e_y;
  doc["e_y_aux"] = s.e_y_aux;
  doc["beta1"] = number_or_null(s.beta1);
  doc["K"] = s.K;
  doc["swept_half_width"] = s.swept_half_width();
  return dump(doc);
}

void write_k_schedule_csv(std::ostream& out, const RoadPath& road, const KSchedule& schedule) {
  out << "s,kappa,K\n";
  for (std::size_t i = 0; i < road.size(); ++i)
    out << fmt_num(road.s(i)) << ',' << fmt_num(road[i].kappa_gamma) << ',' << fmt_num(schedule.values[i]) << '\n';
}

void write_envelope_csv(std::ostream& out, const SweptEnvelope& envelope) {
  out << "s,left,right\n";
  for (std::size_t j = 0; j < envelope.s.size(); ++j) {
    if (!envelope.covered(j)) continue;
    out << fmt_num(envelope.s[j]) << ',' << fmt_num(envelope.left[j]) << ',' << fmt_num(envelope.right[j]) << '\n';
  }
}

std::string envelope_report_json(const EnvelopeReport& r) {
  ojson doc;
  doc["max_left_width"] = r.max_left_width;
  doc["max_right_width"] = r.max_right_width;
  doc["imbalance"] = r.imbalance;
  doc["margin_m"] = r.margin_m;
  if (r.has_interior) {
    doc["interior"] = {{"s_start", r.interior_start},
                       {"s_end", r.interior_end},
                       {"max_left_width", r.interior_max_left},
                       {"max_right_width", r.interior_max_right},
                       {"imbalance", r.interior_imbalance}};
  } else {
    doc["interior"] = nullptr;
  }
  doc["expected_left_width"] = number_or_null(r.expected_left);
  doc["expected_right_width"] = number_or_null(r.expected_right);
  return dump(doc);
}

namespace {

ojson config_json(const PlanConfig& c) {
  ojson doc;
  doc["mode"] = to_string(c.mode);
  doc["objective"] = to_string(c.objective);
  doc["horizon_m"] = c.horizon_m;
  doc["delta_s"] = c.delta_s;
  doc["execute_m"] = c.execute_m;
  doc["omega_kappa"] = c.omega_kappa;
  doc["sqp_tol"] = c.sqp_tol;
  doc["sqp_max_iter"] = c.sqp_max_iter;
  doc["qp"] = {{"eps_abs", c.qp.eps_abs}, {"eps_rel", c.qp.eps_rel}, {"max_iter", c.qp.max_iter}};
  return doc;
}

}  // namespace

std::string drive_stats_json(const DriveResult& result, const PlanConfig& config) {
  ojson doc;
  doc["mode"] = to_string(config.mode);
  doc["objective"] = to_string(config.objective);
  doc["windows"] = result.windows.size();
  long sqp = 0, qp = 0;
  double worst = 0.0;
  std::size_t converged = 0;
  for (const auto& w : result.windows) {
    sqp += w.stats.sqp_iters;
    qp += w.stats.qp_iters;
    worst = std::max(worst, w.stats.constraint_violation);
    converged += w.stats.converged ? 1 : 0;
  }
  doc["sqp_iters_total"] = sqp;
  doc["qp_iters_total"] = qp;
  doc["qp_solves_per_window"] =
      result.windows.empty() ? 0.0 : static_cast<double>(sqp) / static_cast<double>(result.windows.size());
  doc["converged_windows"] = converged;
  doc["all_converged"] = result.all_converged();
  doc["max_constraint_violation"] = worst;
  const auto& states = result.trajectory.states;
  double max_ey = 0.0, max_aux = 0.0;
  for (const auto& z : states) {
    max_ey = std::max(max_ey, std::abs(z.e_y));
    max_aux = std::max(max_aux, std::abs(z.e_y_aux));
  }
  doc["driven_length_m"] = result.trajectory.s.empty() ? 0.0 : result.trajectory.s.back() - result.trajectory.s.front();
  doc["max_abs_e_y"] = max_ey;
  doc["max_abs_e_y_aux"] = max_aux;
  auto& per = doc["per_window"] = ojson::array();
  for (const auto& w : result.windows) {
    per.push_back({{"s_start", w.start_index * config.delta_s},
                   {"sqp_iters", w.stats.sqp_iters},
                   {"qp_iters", w.stats.qp_iters},
                   {"converged", w.stats.converged},
                   {"objective", w.objective},
                   {"constraint_violation", w.stats.constraint_violation}});
  }
  doc["config"] = config_json(config);
  return dump(doc);
}

std::string plan_stats_json(const PlanResult& result, const PlanConfig& config) {
  ojson doc;
  doc["mode"] = to_string(config.mode);
  doc["objective"] = to_string(config.objective);
  doc["objective_value"] = result.objective;
  doc["sqp_iters"] = result.stats.sqp_iters;
  doc["qp_iters"] = result.stats.qp_iters;
  doc["converged"] = result.stats.converged;
  doc["step_norm"] = result.stats.step_norm;
  doc["constraint_violation"] = result.stats.constraint_violation;
  doc["config"] = config_json(config);
  return dump(doc);
}

std::string timing_json(const DriveResult& result, const PlanConfig& config) {
  ojson doc;
  doc["mode"] = to_string(config.mode);
  doc["windows"] = result.windows.size();
  doc["mean_solve_s"] = result.mean_solve_s();
  doc["max_solve_s"] = result.max_solve_s();
  auto& per = doc["solve_s"] = ojson::array();
  for (const auto& w : result.windows) per.push_back(w.stats.solve_time_s);
  return dump(doc);
}

namespace {

struct Viewport {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  double scale = 1.0;
  void add(Point2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  double px(double x) const { return (x - min_x) * scale; }
  double py(double y) const { return (max_y - y) * scale; }
};

void polyline(std::ostream& out, const Viewport& v, const std::vector<Point2>& pts, const char* style) {
  if (pts.empty()) return;
  out << "  <polyline fill=\"none\" " << style << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out << ' ';
    out << fmt_num(std::round(v.px(pts[i].x) * 100.0) / 100.0) << ','
        << fmt_num(std::round(v.py(pts[i].y) * 100.0) / 100.0);
  }
  out << "\"/>\n";
}

}  // namespace

void write_svg(std::ostream& out, const RoadGeometry& geometry, const Trajectory* trajectory,
               const SweptEnvelope* envelope, const SvgOptions& options) {
  const auto& road = geometry.road();
  std::vector<Point2> centre, left_edge, right_edge;
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double s = road.s(i);
    centre.push_back(geometry.position(s));
    left_edge.push_back(geometry.offset_point(s, road[i].w_left));
    right_edge.push_back(geometry.offset_point(s, -road[i].w_right));
  }
  Viewport v;
  for (const auto& p : left_edge) v.add(p);
  for (const auto& p : right_edge) v.add(p);
  const double pad = 5.0;
  v.min_x -= pad;
  v.min_y -= pad;
  v.max_x += pad;
  v.max_y += pad;
  v.scale = options.pixels_per_metre;
  const double width = (v.max_x - v.min_x) * v.scale;
  const double height = (v.max_y - v.min_y) * v.scale;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(std::ceil(width)) << "\" height=\""
      << fmt_num(std::ceil(height)) << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (envelope) {
    std::vector<Point2> band;
    std::vector<Point2> back;
    for (std::size_t j = 0; j < envelope->s.size(); ++j) {
      if (!envelope->covered(j)) continue;
      band.push_back(geometry.offset_point(envelope->s[j], envelope->left[j]));
      back.push_back(geometry.offset_point(envelope->s[j], envelope->right[j]));
    }
    band.insert(band.end(), back.rbegin(), back.rend());
    if (!band.empty()) band.push_back(band.front());
    polyline(out, v, band, "stroke=\"#c0392b\" stroke-width=\"1\" fill-opacity=\"0\"");
  }
  polyline(out, v, left_edge, "stroke=\"black\" stroke-width=\"1.5\"");
  polyline(out, v, right_edge, "stroke=\"black\" stroke-width=\"1.5\"");
  polyline(out, v, centre, "stroke=\"gray\" stroke-width=\"1\" stroke-dasharray=\"6,4\"");
  if (trajectory) {
    std::vector<Point2> path;
    for (const auto& p : trajectory->poses) path.push_back({p.x, p.y});
    polyline(out, v, path, "stroke=\"#2471a3\" stroke-width=\"1.5\"");
  }
  out << "</svg>\n";
}

}  // namespace hdvplan
