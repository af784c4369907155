#include "etsp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "etsp/error.hpp"

namespace etsp {

namespace {

// Uniform double in [0, 1) from the top 53 bits; mt19937_64 output is fixed
// by the standard, so generated instances agree across platforms.
double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
  double u = unit_double(rng);
  while (u == 0.0) u = unit_double(rng);
  const double v = unit_double(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& tok, std::size_t line) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (tok.empty() || pos != tok.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad count '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_matrix(const DistanceMatrix& d, std::size_t n) {
  if (d.size() != n) throw PreconditionError("distance matrix size does not match the point set");
  for (std::size_t i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) throw PreconditionError("distance matrix has a nonzero diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || d(i, j) < 0.0) {
        throw PreconditionError("distance matrix entries must be finite and nonnegative");
      }
      if (d(i, j) != d(j, i)) throw PreconditionError("distance matrix is not symmetric");
    }
  }
}

}  // namespace

std::string_view to_string(WeightModel m) {
  return m == WeightModel::Matrix ? "matrix" : "euclid";
}

DistanceMatrix euclidean_matrix(const PointSet& pts) {
  DistanceMatrix d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) d.set_symmetric(i, j, euclidean(pts[i], pts[j]));
  }
  return d;
}

DistanceMatrix Instance::weights() const {
  return model == WeightModel::Matrix ? matrix : euclidean_matrix(points);
}

Instance euclidean_instance(PointSet pts, std::string name) {
  Instance inst;
  inst.points = std::move(pts);
  inst.name = std::move(name);
  return inst;
}

Instance matrix_instance(PointSet pts, DistanceMatrix d, std::string name) {
  check_matrix(d, pts.size());
  Instance inst;
  inst.points = std::move(pts);
  inst.model = WeightModel::Matrix;
  inst.matrix = std::move(d);
  inst.name = std::move(name);
  return inst;
}

double tour_length(const Instance& inst, std::span<const Index> order) {
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    total += inst.weight(order[i], order[(i + 1) % order.size()]);
  }
  return total;
}

bool is_permutation_of_range(std::span<const Index> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (Index v : order) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

double path_cover_length(const Instance& inst, const PathCover& cover) {
  double total = 0.0;
  for (const auto& path : cover.paths) {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) total += inst.weight(path[i], path[i + 1]);
  }
  return total;
}

GenKind parse_gen_kind(std::string_view s) {
  if (s == "uniform") return GenKind::Uniform;
  if (s == "grid") return GenKind::Grid;
  if (s == "clustered") return GenKind::Clustered;
  throw PreconditionError("unknown generator kind '" + std::string(s) + "'");
}

std::string_view to_string(GenKind k) {
  switch (k) {
    case GenKind::Uniform: return "uniform";
    case GenKind::Grid: return "grid";
    case GenKind::Clustered: return "clustered";
  }
  return "uniform";
}

Instance gen(GenKind kind, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("gen: n must be positive");
  if (d < 2 || d > 4) throw PreconditionError("gen: d must be 2, 3 or 4");
  std::mt19937_64 rng(seed);
  std::vector<double> coords;
  coords.reserve(n * d);
  switch (kind) {
    case GenKind::Uniform:
      for (std::size_t i = 0; i < n * d; ++i) coords.push_back(unit_double(rng));
      break;
    case GenKind::Grid: {
      auto side = static_cast<std::size_t>(std::ceil(nth_root(static_cast<double>(n), d) - 1e-9));
      while (static_cast<double>(side) < nth_root(static_cast<double>(n), d) - 1e-9) ++side;
      std::vector<std::size_t> k(d, 0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) coords.push_back(static_cast<double>(k[j] + 1));
        std::size_t j = d;
        while (j > 0 && ++k[j - 1] == side) k[--j] = 0;
      }
      break;
    }
    case GenKind::Clustered: {
      const std::size_t blobs = 1 + n / 10;
      std::vector<double> centers;
      for (std::size_t i = 0; i < blobs * d; ++i) centers.push_back(unit_double(rng));
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = i % blobs;
        for (std::size_t j = 0; j < d; ++j) coords.push_back(centers[b * d + j] + 0.05 * gaussian(rng));
      }
      break;
    }
  }
  Instance inst = euclidean_instance(PointSet(d, std::move(coords)),
                                     std::string(to_string(kind)) + "-n" + std::to_string(n) +
                                         "-d" + std::to_string(d) + "-s" + std::to_string(seed));
  inst.seed = seed;
  return inst;
}

bool validate_order_preserving(const PointSet& pts, const DistanceMatrix& d) {
  const std::size_t n = pts.size();
  check_matrix(d, n);
  struct Pair {
    double e, w;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({euclidean(pts[i], pts[j]), d(i, j)});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.e < b.e; });
  // Running max of D over all strictly shorter Euclidean groups.
  double prev_max = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < pairs.size();) {
    std::size_t end = g;
    double lo = std::numeric_limits<double>::infinity(), hi = prev_max;
    while (end < pairs.size() && pairs[end].e == pairs[g].e) {
      lo = std::min(lo, pairs[end].w);
      hi = std::max(hi, pairs[end].w);
      ++end;
    }
    if (!(prev_max < lo)) return false;
    prev_max = hi;
    g = end;
  }
  return true;
}

DistanceMatrix perturb_matrix(const PointSet& pts, std::uint64_t seed, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw PreconditionError("perturb_matrix: epsilon must lie in [0, 1]");
  }
  const std::size_t n = pts.size();
  DistanceMatrix d = euclidean_matrix(pts);
  if (epsilon == 0.0 || n < 2) return d;
  std::vector<double> levels{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) levels.push_back(d(i, j));
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() < 2) return d;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < levels.size(); ++k) gap = std::min(gap, levels[k] - levels[k - 1]);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double u = 2.0 * unit_double(rng) - 1.0;
      if (d(i, j) == 0.0) continue;
      d.set_symmetric(i, j, d(i, j) + u * epsilon * gap / 2.0);
    }
  }
  return d;
}

Tour held_karp(const Instance& inst) {
  const std::size_t n = inst.size();
  if (n < 3 || n > 24) throw PreconditionError("held_karp: needs 3 <= n <= 24");
  const DistanceMatrix w = inst.weights();
  const std::size_t m = n - 1;  // vertex 0 is the fixed start
  const std::size_t full = (std::size_t{1} << m) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * m, inf);
  std::vector<std::uint8_t> parent((full + 1) * m, 0);
  for (std::size_t v = 0; v < m; ++v) dp[(std::size_t{1} << v) * m + v] = w(0, v + 1);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (std::size_t v = 0; v < m; ++v) {
      const double cur = dp[mask * m + v];
      if (!(mask >> v & 1) || cur == inf) continue;
      for (std::size_t u = 0; u < m; ++u) {
        if (mask >> u & 1) continue;
        const std::size_t next = (mask | std::size_t{1} << u) * m + u;
        const double cand = cur + w(v + 1, u + 1);
        if (cand < dp[next]) {
          dp[next] = cand;
          parent[next] = static_cast<std::uint8_t>(v);
        }
      }
    }
  }
  double best = inf;
  std::size_t last = 0;
  for (std::size_t v = 0; v < m; ++v) {
    const double cand = dp[full * m + v] + w(v + 1, 0);
    if (cand < best) {
      best = cand;
      last = v;
    }
  }
  std::vector<Index> rev;
  std::size_t mask = full, v = last;
  while (mask != 0) {
    rev.push_back(static_cast<Index>(v + 1));
    const std::size_t p = parent[mask * m + v];
    mask &= ~(std::size_t{1} << v);
    v = p;
  }
  Tour t;
  t.order.push_back(0);
  t.order.insert(t.order.end(), rev.rbegin(), rev.rend());
  t.length = tour_length(inst, t.order);
  return t;
}

PathCover brute_path_cover(const EPCInstance& epc) {
  const Instance& inst = epc.instance;
  const std::size_t n = inst.size();
  if (n > 14) throw PreconditionError("brute_path_cover: n must be at most 14");
  if (epc.boundary.size() % 2 != 0 || epc.matching.size() != epc.boundary.size() ||
      !is_perfect(epc.matching)) {
    throw PreconditionError("brute_path_cover: matching does not pair the boundary");
  }
  PathCover cover;
  if (epc.boundary.empty()) {
    cover.feasible = n == 0;
    if (!cover.feasible) cover.total_length = std::numeric_limits<double>::infinity();
    return cover;
  }
  std::vector<std::pair<Index, Index>> pairs;
  for (const auto& [a, b] : epc.matching.pairs()) pairs.emplace_back(epc.boundary[a], epc.boundary[b]);
  const std::size_t r = pairs.size();
  std::size_t b_mask = 0;
  for (Index v : epc.boundary) b_mask |= std::size_t{1} << v;

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t states = (std::size_t{1} << n) * n;
  std::vector<double> dp(states, inf);
  std::vector<std::int32_t> parent(states, -1);
  std::vector<std::int8_t> via(states, -1);  // closing vertex jumped over
  const auto id = [n](std::size_t mask, std::size_t v) { return mask * n + v; };
  const auto relax = [&](std::size_t to, double cost, std::size_t from, int through) {
    if (cost < dp[to]) {
      dp[to] = cost;
      parent[to] = static_cast<std::int32_t>(from);
      via[to] = static_cast<std::int8_t>(through);
    }
  };
  dp[id(std::size_t{1} << pairs[0].first, pairs[0].first)] = 0.0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::size_t done = 0;
    while (done < r && (mask >> pairs[done].second & 1)) ++done;
    if (done == r) continue;
    const Index target = pairs[done].second;
    for (std::size_t v = 0; v < n; ++v) {
      const double cur = dp[id(mask, v)];
      if (cur == inf) continue;
      for (std::size_t u = 0; u < n; ++u) {
        if ((mask >> u & 1) || (b_mask >> u & 1)) continue;
        relax(id(mask | std::size_t{1} << u, u), cur + inst.weight(static_cast<Index>(v), static_cast<Index>(u)),
              id(mask, v), -1);
      }
      const double closed = cur + inst.weight(static_cast<Index>(v), target);
      const std::size_t m2 = mask | std::size_t{1} << target;
      if (done + 1 < r) {
        const Index next = pairs[done + 1].first;
        relax(id(m2 | std::size_t{1} << next, next), closed, id(mask, v), static_cast<int>(target));
      } else {
        relax(id(m2, target), closed, id(mask, v), -1);
      }
    }
  }
  const std::size_t final_state = id((std::size_t{1} << n) - 1, pairs[r - 1].second);
  if (dp[final_state] == inf) {
    cover.feasible = false;
    cover.total_length = inf;
    return cover;
  }
  std::vector<Index> seq;  // reversed visiting order
  for (std::int64_t s = static_cast<std::int64_t>(final_state); s >= 0; s = parent[static_cast<std::size_t>(s)]) {
    seq.push_back(static_cast<Index>(static_cast<std::size_t>(s) % n));
    if (via[static_cast<std::size_t>(s)] >= 0) seq.push_back(static_cast<Index>(via[static_cast<std::size_t>(s)]));
  }
  std::reverse(seq.begin(), seq.end());
  cover.paths.resize(r);
  std::size_t p = 0;
  for (Index v : seq) {
    cover.paths[p].push_back(v);
    if (v == pairs[p].second) ++p;
  }
  cover.total_length = path_cover_length(inst, cover);
  return cover;
}

Instance read_instance(std::istream& in, std::string name) {
  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty instance file");
  const auto head = split_ws(line);
  if (head.size() != 5 || head[0] != "tsp-instance" || head[1] != "v1") {
    throw ParseError("line 1: expected 'tsp-instance v1 d=<d> n=<n> model=<euclid|matrix>'");
  }
  const auto field = [&](const std::string& tok, const std::string& key) {
    if (tok.rfind(key + "=", 0) != 0) throw ParseError("line 1: expected " + key + "=");
    return tok.substr(key.size() + 1);
  };
  const std::size_t d = parse_count(field(head[2], "d"), line_no);
  const std::size_t n = parse_count(field(head[3], "n"), line_no);
  const std::string model = field(head[4], "model");
  if (d < 1) throw ParseError("line 1: dimension must be positive");
  if (model != "euclid" && model != "matrix") throw ParseError("line 1: unknown model '" + model + "'");

  std::vector<double> coords;
  for (std::size_t i = 0; i < n; ++i) {
    if (!next_line()) throw ParseError("unexpected end of file in coordinates");
    const auto toks = split_ws(line);
    if (toks.size() != d) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d) + " coordinates");
    }
    for (const auto& t : toks) coords.push_back(parse_double(t, line_no));
  }
  PointSet pts(d, std::move(coords));
  if (model == "euclid") {
    if (next_line()) throw ParseError("line " + std::to_string(line_no) + ": trailing data");
    return euclidean_instance(std::move(pts), std::move(name));
  }
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!next_line()) throw ParseError("unexpected end of file in matrix");
    const auto toks = split_ws(line);
    if (toks.size() != n) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(n) + " entries");
    }
    for (std::size_t j = 0; j < n; ++j) m(i, j) = parse_double(toks[j], line_no);
  }
  if (next_line()) throw ParseError("line " + std::to_string(line_no) + ": trailing data");
  try {
    return matrix_instance(std::move(pts), std::move(m), std::move(name));
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
}

Instance read_instance_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'");
  std::string first;
  while (std::getline(f, first) && trim(first).empty()) {
  }
  f.clear();
  f.seekg(0);
  std::string stem = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (const auto dot = stem.rfind('.'); dot != std::string::npos && dot > 0) stem.resize(dot);
  if (trim(first).rfind("tsp-instance", 0) == 0) return read_instance(f, stem);
  Instance inst = read_tsplib(f);
  if (inst.name.empty()) inst.name = stem;
  return inst;
}

void write_instance(std::ostream& out, const Instance& inst) {
  out << "tsp-instance v1 d=" << inst.dim() << " n=" << inst.size() << " model=" << to_string(inst.model)
      << '\n';
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto p = inst.points[i];
    for (std::size_t j = 0; j < p.size(); ++j) out << (j ? " " : "") << format_double(p[j]);
    out << '\n';
  }
  if (inst.model == WeightModel::Matrix) {
    for (std::size_t i = 0; i < inst.size(); ++i) {
      for (std::size_t j = 0; j < inst.size(); ++j) out << (j ? " " : "") << format_double(inst.matrix(i, j));
      out << '\n';
    }
  }
}

Instance read_tsplib(std::istream& in) {
  std::string line, name, type;
  std::size_t dim = 0, line_no = 0, declared = 0;
  bool have_count = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "NODE_COORD_SECTION") break;
    if (t == "EOF") throw ParseError("TSPLIB: no NODE_COORD_SECTION");
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected KEY : VALUE");
    const std::string key = trim(t.substr(0, colon));
    const std::string value = trim(t.substr(colon + 1));
    if (key == "NAME") name = value;
    if (key == "DIMENSION") {
      declared = parse_count(value, line_no);
      have_count = true;
    }
    if (key == "EDGE_WEIGHT_TYPE") type = value;
  }
  if (type == "EUC_2D") {
    dim = 2;
  } else if (type == "EUC_3D") {
    dim = 3;
  } else {
    throw ParseError("TSPLIB: unsupported EDGE_WEIGHT_TYPE '" + type + "'");
  }
  std::vector<double> coords;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "EOF") break;
    const auto toks = split_ws(t);
    if (toks.size() != dim + 1) throw ParseError("line " + std::to_string(line_no) + ": bad node line");
    for (std::size_t j = 1; j <= dim; ++j) coords.push_back(parse_double(toks[j], line_no));
    ++count;
  }
  if (have_count && count != declared) throw ParseError("TSPLIB: DIMENSION does not match the node count");
  return euclidean_instance(PointSet(dim, std::move(coords)), name);
}

}  // namespace etsp
