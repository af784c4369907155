#include "etsp/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "etsp/error.hpp"

namespace etsp {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

WeightModel parse_model(const std::string& s) {
  if (s == "euclid") return WeightModel::Euclidean;
  if (s == "matrix") return WeightModel::Matrix;
  throw ParseError("result: unknown model '" + s + "'");
}

}  // namespace

RunResult run_solve(const Instance& inst, const SolverConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const SolveResult s = solve_tsp(inst, cfg);
  const auto stop = std::chrono::steady_clock::now();
  RunResult r;
  r.instance = inst.name;
  r.n = inst.size();
  r.d = inst.dim();
  r.model = inst.model;
  r.length = s.tour.length;
  r.tour = s.tour.order;
  r.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  r.candidates = s.stats.candidates;
  r.max_boundary = s.stats.max_boundary;
  r.config = cfg;
  r.config.base_threshold = cfg.n0(inst.dim());
  if (s.stats.has_top_separator) r.top_separator = s.stats.top_separator;
  return r;
}

void attach_oracle(RunResult& r, const Instance& inst) {
  const Tour t = held_karp(inst);
  r.oracle_length = t.length;
  r.oracle_match = std::abs(t.length - r.length) <= 1e-9 * std::max(1.0, std::abs(t.length));
}

std::string to_json(const RunResult& r, bool deterministic) {
  json cfg = {
      {"gamma", r.config.gamma},
      {"base", r.config.base_threshold},
      {"caps", {r.config.caps.c_cube, r.config.caps.c_long, r.config.caps.c_short}},
      {"c_hi", r.config.c_hi},
      {"exchange_filter", r.config.exchange_filter},
      {"bound_pruning", r.config.bound_pruning},
  };
  if (!deterministic) cfg["workers"] = r.config.workers;
  json j = {
      {"schema", kResultSchema},
      {"instance", r.instance},
      {"n", r.n},
      {"d", r.d},
      {"model", to_string(r.model)},
      {"length", r.length},
      {"tour", r.tour},
      {"candidates", r.candidates},
      {"max_boundary", r.max_boundary},
      {"config", cfg},
  };
  if (!deterministic) j["wall_time_ms"] = r.wall_time_ms;
  if (r.top_separator) {
    j["separator"] = {{"center", r.top_separator->center}, {"size", r.top_separator->size}};
  }
  if (r.oracle_length) j["oracle_length"] = *r.oracle_length;
  if (r.oracle_match) j["oracle_match"] = *r.oracle_match;
  return j.dump(2);
}

RunResult result_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("result: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kResultSchema) throw ParseError("result: unsupported schema");
    RunResult r;
    r.instance = j.at("instance").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.d = j.at("d").get<std::size_t>();
    r.model = parse_model(j.at("model").get<std::string>());
    r.length = j.at("length").get<double>();
    r.tour = j.at("tour").get<std::vector<Index>>();
    r.candidates = j.at("candidates").get<std::uint64_t>();
    r.max_boundary = j.at("max_boundary").get<std::size_t>();
    const json& c = j.at("config");
    r.config.gamma = c.at("gamma").get<double>();
    r.config.base_threshold = c.at("base").get<std::size_t>();
    const auto caps = c.at("caps").get<std::vector<std::size_t>>();
    if (caps.size() != 3) throw ParseError("result: caps must have three entries");
    r.config.caps = {caps[0], caps[1], caps[2]};
    r.config.c_hi = c.at("c_hi").get<double>();
    r.config.exchange_filter = c.at("exchange_filter").get<bool>();
    r.config.bound_pruning = c.at("bound_pruning").get<bool>();
    if (c.contains("workers")) r.config.workers = c.at("workers").get<std::size_t>();
    if (j.contains("wall_time_ms")) r.wall_time_ms = j.at("wall_time_ms").get<double>();
    if (j.contains("separator")) {
      Separator s;
      s.center = j.at("separator").at("center").get<Point>();
      s.size = j.at("separator").at("size").get<double>();
      r.top_separator = s;
    }
    if (j.contains("oracle_length")) r.oracle_length = j.at("oracle_length").get<double>();
    if (j.contains("oracle_match")) r.oracle_match = j.at("oracle_match").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result: ") + e.what());
  }
}

std::string render_svg(const Instance& inst, std::span<const Index> tour, const std::optional<Separator>& sigma) {
  if (inst.dim() != 2) throw PreconditionError("render: only d = 2 can be drawn");
  const PointSet& pts = inst.points;
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  const auto extend = [&](double x, double y) {
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  };
  for (std::size_t i = 0; i < pts.size(); ++i) extend(pts[i][0], pts[i][1]);
  if (sigma) {
    extend(sigma->center[0] - sigma->half(), sigma->center[1] - sigma->half());
    extend(sigma->center[0] + sigma->half(), sigma->center[1] + sigma->half());
  }
  if (pts.empty()) lo_x = lo_y = hi_x = hi_y = 0.0;
  const double canvas = 800.0, margin = 40.0;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double scale = (canvas - 2 * margin) / span;
  const auto sx = [&](double x) { return margin + (x - lo_x) * scale; };
  const auto sy = [&](double y) { return canvas - margin - (y - lo_y) * scale; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << canvas << "\" height=\"" << canvas
      << "\" viewBox=\"0 0 " << canvas << ' ' << canvas << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!tour.empty()) {
    out << "  <polygon class=\"tour\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < tour.size(); ++k) {
      if (k) out << ' ';
      out << fmt(sx(pts[tour[k]][0])) << ',' << fmt(sy(pts[tour[k]][1]));
    }
    out << "\"/>\n";
  }
  if (sigma) {
    const double x0 = sx(sigma->center[0] - sigma->half());
    const double y0 = sy(sigma->center[1] + sigma->half());
    const double side = sigma->size * scale;
    out << "  <rect class=\"separator\" x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(side)
        << "\" height=\"" << fmt(side) << "\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
    out << "  <text class=\"separator-size\" x=\"" << fmt(x0) << "\" y=\"" << fmt(y0 - 6)
        << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#d62728\">size " << fmt(sigma->size)
        << "</text>\n";
    for (std::size_t k = 0; k < tour.size(); ++k) {
      const Segment s = make_segment(tour[k], tour[(k + 1) % tour.size()]);
      if (!crosses(s, *sigma, pts)) continue;
      out << "  <line class=\"crossing\" x1=\"" << fmt(sx(pts[s.a][0])) << "\" y1=\"" << fmt(sy(pts[s.a][1]))
          << "\" x2=\"" << fmt(sx(pts[s.b][0])) << "\" y2=\"" << fmt(sy(pts[s.b][1]))
          << "\" stroke=\"#ff7f0e\" stroke-width=\"3\"/>\n";
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << "  <circle class=\"point\" cx=\"" << fmt(sx(pts[i][0])) << "\" cy=\"" << fmt(sy(pts[i][1]))
        << "\" r=\"3\" fill=\"black\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

BenchRow bench_one(std::size_t n, std::uint64_t seed, std::size_t d, const SolverConfig& cfg) {
  const Instance inst = gen(GenKind::Uniform, n, d, seed);
  const RunResult r = run_solve(inst, cfg);
  BenchRow row;
  row.n = n;
  row.seed = seed;
  row.d = d;
  row.time_ms = r.wall_time_ms;
  row.cands = r.candidates;
  const double denom = std::pow(static_cast<double>(n), 1.0 - 1.0 / static_cast<double>(d));
  row.ratio = r.candidates > 0 ? std::log2(static_cast<double>(r.candidates)) / denom : 0.0;
  row.length = r.length;
  return row;
}

std::string bench_csv_row(const BenchRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%llu,%zu,%.3f,%llu,%.6f,%.12g", row.n,
                static_cast<unsigned long long>(row.seed), row.d, row.time_ms,
                static_cast<unsigned long long>(row.cands), row.ratio, row.length);
  return buf;
}

}  // namespace etsp
