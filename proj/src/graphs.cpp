#include "snowflake/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>

#include "snowflake/common.hpp"

namespace snowflake {

int WeightedGraph::num_nodes() const { return static_cast<int>(coords.cols()); }

void WeightedGraph::validate() const {
  require(edges.size() == weights.size(), "graph: one weight per edge required");
  const int n = num_nodes();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    require(u >= 0 && u < n && v >= 0 && v < n, "graph: edge endpoint out of range");
    require(u != v, "graph: self-loops are not allowed");
    require(weights[e] > 0.0 && std::isfinite(weights[e]), "graph: edge weights must be positive");
  }
}

bool WeightedGraph::is_connected() const {
  const int n = num_nodes();
  if (n <= 1) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  int components = n;
  for (const auto& [u, v] : edges) {
    const int a = find(u), b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

bool WeightedGraph::is_tree() const {
  return num_nodes() >= 1 && edges.size() + 1 == static_cast<std::size_t>(num_nodes()) && is_connected();
}

void DistanceMatrix::validate(double tolerance) const {
  require(values.rows() == values.cols(), "distance matrix must be square");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    require(std::abs(values(i, i)) <= tolerance, "distance matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      require(std::isfinite(values(i, j)) && values(i, j) >= -tolerance, "distance matrix must be non-negative");
      require(std::abs(values(i, j) - values(j, i)) <= tolerance, "distance matrix must be symmetric");
    }
  }
}

DistanceMatrix geodesic_distances(const WeightedGraph& g) {
  g.validate();
  require(g.is_connected(), "geodesic_distances: graph is disconnected");
  const int n = g.num_nodes();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    adj[u].emplace_back(v, g.weights[e]);
    adj[v].emplace_back(u, g.weights[e]);
  }

  DistanceMatrix out{Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity())};
  using Item = std::pair<double, int>;
  for (int src = 0; src < n; ++src) {
    auto dist = out.values.col(src);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist(src) = 0.0;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist(u)) continue;
      for (const auto& [v, w] : adj[u]) {
        if (d + w < dist(v)) {
          dist(v) = d + w;
          heap.emplace(dist(v), v);
        }
      }
    }
  }
  // Dijkstra from each side can differ in the last ulp; keep the matrix exactly symmetric.
  out.values = out.values.cwiseMin(out.values.transpose()).eval();
  return out;
}

double aspect_ratio(const DistanceMatrix& d) {
  const int n = d.size();
  if (n <= 1) return 1.0;
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = d(i, j);
      hi = std::max(hi, v);
      if (v > 0.0) lo = std::min(lo, v);
    }
  if (!std::isfinite(lo)) return 1.0;
  return hi / lo;
}

Eigen::MatrixXd sample_pointcloud(int n, int dim, std::uint64_t seed) {
  require(n >= 1 && dim >= 1, "sample_pointcloud: n and dim must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd pts(dim, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < dim; ++r) pts(r, c) = std::clamp(normal(rng), -1.0, 1.0);
  return pts;
}

std::string to_string(MetricId id) {
  return "M" + std::to_string(static_cast<int>(id) + 1);
}

MetricId parse_metric_id(std::string_view name) {
  for (MetricId id : kAllMetrics)
    if (name == to_string(id)) return id;
  throw InvalidArgument("unknown metric id: " + std::string(name));
}

std::string metric_formula(MetricId id) {
  switch (id) {
    case MetricId::M1: return "s^0.5*log(1+s)^0.5";
    case MetricId::M2: return "s^0.1*log(1+s)^0.9";
    case MetricId::M3: return "1-1/(1+s^0.5)";
    case MetricId::M4: return "1-exp(-(s-1)/log(s))";
    case MetricId::M5: return "1-1/(1+s)^0.2";
    case MetricId::M6: return "1-1/(1+s^0.2+s^0.5)";
  }
  throw InvalidArgument("unknown metric id");
}

namespace {

// (s - 1) / log s, the logarithmic mean of 1 and s; equals 1 at s = 1.
double log_mean(double s) {
  const double u = s - 1.0;
  if (std::abs(u) < 1e-4) return 1.0 + u / 2.0 - u * u / 12.0 + u * u * u / 24.0;
  return u / std::log1p(u);
}

}  // namespace

double synthetic_target(MetricId id, double s) {
  require(s >= 0.0, "synthetic_target: s must be non-negative");
  switch (id) {
    case MetricId::M1: return std::sqrt(s) * std::sqrt(std::log1p(s));
    case MetricId::M2: return std::pow(s, 0.1) * std::pow(std::log1p(s), 0.9);
    case MetricId::M3: return 1.0 - 1.0 / (1.0 + std::sqrt(s));
    case MetricId::M4: return s == 0.0 ? 0.0 : 1.0 - std::exp(-log_mean(s));
    case MetricId::M5: return 1.0 - std::pow(1.0 + s, -0.2);
    case MetricId::M6: return 1.0 - 1.0 / (1.0 + std::pow(s, 0.2) + std::sqrt(s));
  }
  throw InvalidArgument("unknown metric id");
}

bool Distortion::is_isometry(double tolerance) const {
  return std::abs(s - 1.0) <= tolerance && std::abs(L - 1.0) <= tolerance;
}

Distortion distortion(const DistanceMatrix& embedded, const DistanceMatrix& target) {
  require(embedded.size() == target.size(), "distortion: size mismatch");
  Distortion out{std::numeric_limits<double>::infinity(), 0.0};
  bool any = false;
  for (int i = 0; i < target.size(); ++i)
    for (int j = i + 1; j < target.size(); ++j) {
      const double t = target(i, j);
      const double e = embedded(i, j);
      if (t == 0.0) {
        require(e == 0.0, "distortion: zero target distance with nonzero embedded distance");
        continue;
      }
      const double ratio = e / t;
      out.s = std::min(out.s, ratio);
      out.L = std::max(out.L, ratio);
      any = true;
    }
  if (!any) return Distortion{};
  return out;
}

WeightedGraph five_node_obstruction_graph() {
  WeightedGraph g;
  // A, B, C, D, E placed on a pentagon; positions do not affect geodesics.
  g.coords.resize(2, 5);
  for (int i = 0; i < 5; ++i) {
    const double angle = 2.0 * M_PI * i / 5.0;
    g.coords(0, i) = std::cos(angle);
    g.coords(1, i) = std::sin(angle);
  }
  enum { A, B, C, D, E };
  g.edges = {{A, E}, {A, D}, {E, B}, {B, D}, {D, C}};
  g.weights.assign(g.edges.size(), 1.0);
  return g;
}

WeightedGraph cycle_graph(int n) {
  require(n >= 3, "cycle_graph needs at least 3 nodes");
  WeightedGraph g;
  g.coords.resize(2, n);
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * M_PI * i / n;
    g.coords(0, i) = std::cos(angle);
    g.coords(1, i) = std::sin(angle);
    g.edges.emplace_back(i, (i + 1) % n);
  }
  g.weights.assign(n, 1.0);
  return g;
}

WeightedGraph random_connected_graph(int n, std::uint64_t seed, double extra_edge_prob) {
  require(n >= 2, "random_connected_graph needs at least 2 nodes");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.1, 2.0);
  WeightedGraph g;
  g.coords = Eigen::MatrixXd::NullaryExpr(2, n, [&] { return unit(rng); });
  std::vector<char> linked(static_cast<std::size_t>(n) * n, 0);
  for (int v = 1; v < n; ++v) {
    const int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    g.edges.emplace_back(u, v);
    g.weights.push_back(weight(rng));
    linked[u * n + v] = 1;
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (!linked[u * n + v] && unit(rng) < extra_edge_prob) {
        g.edges.emplace_back(u, v);
        g.weights.push_back(weight(rng));
      }
  return g;
}

void to_json(nlohmann::json& j, const WeightedGraph& g) {
  nlohmann::json coords = nlohmann::json::array();
  for (Eigen::Index c = 0; c < g.coords.cols(); ++c) {
    std::vector<double> p(g.coords.rows());
    for (Eigen::Index r = 0; r < g.coords.rows(); ++r) p[r] = g.coords(r, c);
    coords.push_back(p);
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  j = nlohmann::json{{"coords", coords}, {"edges", edges}, {"weights", g.weights}};
}

void from_json(const nlohmann::json& j, WeightedGraph& g) {
  const auto coords = j.at("coords").get<std::vector<std::vector<double>>>();
  const std::size_t dim = coords.empty() ? 0 : coords.front().size();
  g.coords.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(coords.size()));
  for (std::size_t c = 0; c < coords.size(); ++c) {
    require(coords[c].size() == dim, "graph json: ragged coordinates");
    for (std::size_t r = 0; r < dim; ++r) g.coords(r, c) = coords[c][r];
  }
  g.edges.clear();
  for (const auto& e : j.at("edges")) {
    const auto pair = e.get<std::vector<int>>();
    require(pair.size() == 2, "graph json: edges must be pairs");
    g.edges.emplace_back(pair[0], pair[1]);
  }
  g.weights = j.at("weights").get<std::vector<double>>();
  g.validate();
}

void write_csv(std::ostream& out, const DistanceMatrix& d) {
  const int n = d.size();
  for (int j = 0; j < n; ++j) out << (j ? "," : "") << j;
  out << '\n';
  const auto old = out.precision(17);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out << (j ? "," : "") << d(i, j);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace snowflake
