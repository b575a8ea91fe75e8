#include "hdvplan/road.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "hdvplan/errors.hpp"
#include "hdvplan/format.hpp"
#include "text.hpp"

namespace hdvplan {

namespace {

using detail::parse_number;
using detail::split;
using detail::trim;

constexpr double kGridTolerance = 1e-9;

RoadPath parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty road file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  int col_s = -1, col_k = -1, col_wl = -1, col_wr = -1;
  auto header = split(line, ',');
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    int* slot = name == "s"         ? &col_s
                : name == "kappa"   ? &col_k
                : name == "w_left"  ? &col_wl
                : name == "w_right" ? &col_wr
                                    : nullptr;
    if (slot == nullptr) throw ParseError("unknown road column '" + name + "'");
    if (*slot >= 0) throw ParseError("duplicate road column '" + name + "'");
    *slot = static_cast<int>(c);
  }
  if (col_s < 0 || col_k < 0) throw ParseError("road header must contain 's' and 'kappa'");

  std::vector<RoadSample> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    RoadSample sample;
    sample.s = parse_number(fields[col_s], row, "s");
    sample.kappa_gamma = parse_number(fields[col_k], row, "kappa");
    if (col_wl >= 0) sample.w_left = parse_number(fields[col_wl], row, "w_left");
    if (col_wr >= 0) sample.w_right = parse_number(fields[col_wr], row, "w_right");
    samples.push_back(sample);
  }
  if (samples.size() < 2) throw ValidationError("road needs at least 2 samples");
  return RoadPath(std::move(samples), samples[1].s - samples[0].s);
}

RoadPath parse_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("road JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("road JSON must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "delta_s" && key != "anchor" && key != "samples")
      throw ParseError("road JSON: unknown key '" + key + "'");
  }
  if (!doc.contains("samples") || !doc["samples"].is_array())
    throw ParseError("road JSON: 'samples' array required");

  auto number = [](const nlohmann::json& v, const std::string& what) {
    if (!v.is_number()) throw ParseError("road JSON: '" + what + "' must be a number");
    return v.get<double>();
  };

  GlobalPose anchor;
  if (doc.contains("anchor")) {
    const auto& a = doc["anchor"];
    if (!a.is_array() || a.size() != 3) throw ParseError("road JSON: 'anchor' must be [x, y, heading]");
    anchor = {number(a[0], "anchor"), number(a[1], "anchor"), number(a[2], "anchor")};
  }

  std::vector<RoadSample> samples;
  for (const auto& item : doc["samples"]) {
    if (!item.is_object()) throw ParseError("road JSON: samples must be objects");
    RoadSample sample;
    bool has_s = false, has_k = false;
    for (const auto& [key, value] : item.items()) {
      if (key == "s") {
        sample.s = number(value, key);
        has_s = true;
      } else if (key == "kappa") {
        sample.kappa_gamma = number(value, key);
        has_k = true;
      } else if (key == "w_left") {
        sample.w_left = number(value, key);
      } else if (key == "w_right") {
        sample.w_right = number(value, key);
      } else {
        throw ParseError("road JSON: unknown sample key '" + key + "'");
      }
    }
    if (!has_s || !has_k) throw ParseError("road JSON: every sample needs 's' and 'kappa'");
    samples.push_back(sample);
  }
  if (samples.size() < 2) throw ValidationError("road needs at least 2 samples");
  double delta_s = samples[1].s - samples[0].s;
  if (doc.contains("delta_s")) {
    const double declared = number(doc["delta_s"], "delta_s");
    if (std::abs(declared - delta_s) > kGridTolerance * std::max(1.0, declared))
      throw ValidationError("declared delta_s does not match sample spacing", 1);
    delta_s = declared;
  }
  return RoadPath(std::move(samples), delta_s, anchor);
}

}  // namespace

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

RoadPath::RoadPath(std::vector<RoadSample> samples, double delta_s, GlobalPose anchor,
                   double kappa_bound)
    : samples_(std::move(samples)), delta_s_(delta_s), anchor_(anchor) {
  if (samples_.size() < 2) throw ValidationError("road needs at least 2 samples");
  if (!(delta_s_ > 0.0) || !std::isfinite(delta_s_))
    throw ValidationError("delta_s must be positive and finite");
  if (!std::isfinite(anchor_.x) || !std::isfinite(anchor_.y) || !std::isfinite(anchor_.heading))
    throw ValidationError("anchor must be finite");
  anchor_.heading = normalize_angle(anchor_.heading);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    auto& sample = samples_[i];
    const double expected = delta_s_ * static_cast<double>(i);
    if (!std::isfinite(sample.s) ||
        std::abs(sample.s - expected) > kGridTolerance * std::max(1.0, expected))
      throw ValidationError("non-uniform grid: s must equal i * delta_s", i);
    sample.s = expected;
    if (!std::isfinite(sample.kappa_gamma)) throw ValidationError("curvature not finite", i);
    if (std::abs(sample.kappa_gamma) > kappa_bound)
      throw ValidationError("curvature exceeds sanity bound", i);
    if (!(sample.w_left > 0.0) || !(sample.w_right > 0.0) || !std::isfinite(sample.w_left) ||
        !std::isfinite(sample.w_right))
      throw ValidationError("lane half-widths must be positive", i);
    max_half_width_ = std::max({max_half_width_, sample.w_left, sample.w_right});
  }
}

double RoadPath::curvature_at(double s) const {
  if (!(s >= 0.0) || s > length() * (1.0 + 1e-12))
    throw OutOfRange("curvature_at: s=" + std::to_string(s) + " outside [0, " +
                     std::to_string(length()) + "]");
  const double u = s / delta_s_;
  auto i = static_cast<std::size_t>(std::floor(u));
  if (i >= segments()) return samples_.back().kappa_gamma;
  const double t = u - static_cast<double>(i);
  if (t == 0.0) return samples_[i].kappa_gamma;
  return samples_[i].kappa_gamma + t * (samples_[i + 1].kappa_gamma - samples_[i].kappa_gamma);
}

RoadPath RoadPath::resampled(double delta_s) const {
  const auto count = static_cast<std::size_t>(std::floor(length() / delta_s + 1e-9)) + 1;
  std::vector<RoadSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = std::min(delta_s * static_cast<double>(i), length());
    const double u = s / delta_s_;
    const auto j = std::min(static_cast<std::size_t>(std::floor(u)), segments() - 1);
    const double t = u - static_cast<double>(j);
    const auto& a = samples_[j];
    const auto& b = samples_[j + 1];
    out.push_back({delta_s * static_cast<double>(i), a.kappa_gamma + t * (b.kappa_gamma - a.kappa_gamma),
                   a.w_left + t * (b.w_left - a.w_left), a.w_right + t * (b.w_right - a.w_right)});
  }
  return RoadPath(std::move(out), delta_s, anchor_);
}

RoadPath load_road(std::istream& in, RoadFormat format) {
  return format == RoadFormat::csv ? parse_csv(in) : parse_json(in);
}

RoadPath load_road_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open road file '" + path + "'");
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return load_road(in, json ? RoadFormat::json : RoadFormat::csv);
}

void write_road(std::ostream& out, const RoadPath& road, RoadFormat format) {
  if (format == RoadFormat::csv) {
    out << "s,kappa,w_left,w_right\n";
    for (const auto& p : road.samples())
      out << fmt_num(p.s) << ',' << fmt_num(p.kappa_gamma) << ',' << fmt_num(p.w_left) << ','
          << fmt_num(p.w_right) << '\n';
    return;
  }
  nlohmann::ordered_json doc;
  doc["delta_s"] = road.delta_s();
  doc["anchor"] = {road.anchor().x, road.anchor().y, road.anchor().heading};
  auto& samples = doc["samples"] = nlohmann::ordered_json::array();
  for (const auto& p : road.samples())
    samples.push_back({{"s", p.s}, {"kappa", p.kappa_gamma}, {"w_left", p.w_left}, {"w_right", p.w_right}});
  out << doc.dump(1) << '\n';
}

// --- geometry ---------------------------------------------------------------

RoadGeometry::RoadGeometry(RoadPath road, int substeps)
    : road_(std::move(road)), substeps_(substeps) {
  if (substeps_ < 1) throw ValidationError("substeps must be >= 1");
  const double ds = road_.delta_s();
  h_ = ds / substeps_;
  const std::size_t n = road_.segments();
  sample_heading_.resize(n + 1);
  sample_heading_[0] = road_.anchor().heading;
  for (std::size_t i = 1; i <= n; ++i)
    sample_heading_[i] =
        sample_heading_[i - 1] + 0.5 * ds * (road_[i - 1].kappa_gamma + road_[i].kappa_gamma);

  dense_.resize(n * static_cast<std::size_t>(substeps_) + 1);
  dense_[0] = {road_.anchor().x, road_.anchor().y};
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < substeps_; ++j, ++k) {
      const double mid = road_.s(i) + (j + 0.5) * h_;
      const double th = heading(mid);
      dense_[k + 1] = {dense_[k].x + h_ * std::cos(th), dense_[k].y + h_ * std::sin(th)};
    }
  }
}

double RoadGeometry::heading(double s) const {
  const std::size_t n = road_.segments();
  if (s <= 0.0) return sample_heading_[0];
  if (s >= road_.length()) return sample_heading_[n];
  const double ds = road_.delta_s();
  const auto i = std::min(static_cast<std::size_t>(s / ds), n - 1);
  const double t = s - road_.s(i);
  const double k0 = road_[i].kappa_gamma;
  const double k1 = road_[i + 1].kappa_gamma;
  return sample_heading_[i] + k0 * t + (k1 - k0) * t * t / (2.0 * ds);
}

Point2 RoadGeometry::position(double s) const {
  if (s <= 0.0) {
    const double th = sample_heading_.front();
    return {dense_.front().x + s * std::cos(th), dense_.front().y + s * std::sin(th)};
  }
  const double len = road_.length();
  if (s >= len) {
    const double th = sample_heading_.back();
    return {dense_.back().x + (s - len) * std::cos(th), dense_.back().y + (s - len) * std::sin(th)};
  }
  const auto k = std::min(static_cast<std::size_t>(s / h_), dense_.size() - 2);
  const double sk = static_cast<double>(k) * h_;
  const double step = s - sk;
  if (step == 0.0) return dense_[k];
  const double th = heading(sk + 0.5 * step);
  return {dense_[k].x + step * std::cos(th), dense_[k].y + step * std::sin(th)};
}

GlobalPose RoadGeometry::pose(double s) const {
  const auto p = position(s);
  return {p.x, p.y, normalize_angle(heading(s))};
}

Point2 RoadGeometry::normal(double s) const {
  const double th = heading(s);
  return {-std::sin(th), std::cos(th)};
}

Point2 RoadGeometry::offset_point(double s, double lateral) const {
  const auto p = position(s);
  const auto n = normal(s);
  return {p.x + lateral * n.x, p.y + lateral * n.y};
}

std::vector<GlobalPose> RoadGeometry::sample_poses() const {
  std::vector<GlobalPose> out;
  out.reserve(road_.size());
  const auto stride = static_cast<std::size_t>(substeps_);
  for (std::size_t i = 0; i < road_.size(); ++i)
    out.push_back({dense_[i * stride].x, dense_[i * stride].y, normalize_angle(sample_heading_[i])});
  return out;
}

std::shared_ptr<const RoadGeometry> reconstruct_global(const RoadPath& road, int substeps) {
  return std::make_shared<const RoadGeometry>(road, substeps);
}

Projection project_point(const RoadGeometry& geometry, Point2 p, double hint_s) {
  const auto& road = geometry.road();
  const double trust = 2.0 * road.delta_s();
  double s = hint_s;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const auto c = geometry.position(s);
    const double th = geometry.heading(s);
    const double tx = std::cos(th), ty = std::sin(th);
    const double dx = p.x - c.x, dy = p.y - c.y;
    const double along = dx * tx + dy * ty;
    const double lateral = -dx * ty + dy * tx;
    double kappa = 0.0;
    if (s > 0.0 && s < road.length()) kappa = road.curvature_at(s);
    const double slope = std::max(1.0 - kappa * lateral, 0.1);
    const double step = std::clamp(along / slope, -trust, trust);
    s += step;
    if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(s))) {
      converged = true;
      break;
    }
  }
  if (!converged || !std::isfinite(s))
    throw ProjectionDiverged("projection did not converge near s=" + std::to_string(hint_s));

  const auto c = geometry.position(s);
  const auto n = geometry.normal(s);
  const double lateral = (p.x - c.x) * n.x + (p.y - c.y) * n.y;

  if (std::abs(lateral) > road.max_half_width() + 50.0)
    throw ProjectionDiverged("point is " + std::to_string(std::abs(lateral)) +
                             " m from the path, beyond the projection guard");
  return {s, lateral};
}

}  // namespace hdvplan
