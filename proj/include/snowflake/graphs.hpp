#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace snowflake {

/// Undirected graph with positive edge weights. coords holds one node per column.
struct WeightedGraph {
  Eigen::MatrixXd coords;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> weights;

  int num_nodes() const;
  /// Throws InvalidArgument on bad indices, self-loops or non-positive weights.
  void validate() const;
  bool is_connected() const;
  bool is_tree() const;
};

/// Square, symmetric, non-negative, zero diagonal.
struct DistanceMatrix {
  Eigen::MatrixXd values;

  int size() const { return static_cast<int>(values.rows()); }
  double operator()(int i, int j) const { return values(i, j); }
  void validate(double tolerance = 0.0) const;
};

/// All-pairs shortest paths via one binary-heap Dijkstra per source.
DistanceMatrix geodesic_distances(const WeightedGraph& g);

/// max / min nonzero pairwise distance; 1 for fewer than two nodes.
double aspect_ratio(const DistanceMatrix& d);

/// n points in R^dim (columns), coordinates N(0,1) clamped to [-1, 1].
Eigen::MatrixXd sample_pointcloud(int n, int dim, std::uint64_t seed);

enum class MetricId { M1, M2, M3, M4, M5, M6 };

inline constexpr std::array<MetricId, 6> kAllMetrics{MetricId::M1, MetricId::M2, MetricId::M3,
                                                     MetricId::M4, MetricId::M5, MetricId::M6};

std::string to_string(MetricId id);
MetricId parse_metric_id(std::string_view name);
/// Human-readable formula in terms of s = ||x - y||.
std::string metric_formula(MetricId id);

/// Target distance as a function of s = ||x - y||:
///   M1 s^0.5 log(1+s)^0.5      M2 s^0.1 log(1+s)^0.9
///   M3 1 - 1/(1 + s^0.5)       M4 1 - exp(-(s-1)/log s)
///   M5 1 - (1+s)^-0.2          M6 1 - 1/(1 + s^0.2 + s^0.5)
/// M4 takes its continuous extension at s = 0 and s = 1.
double synthetic_target(MetricId id, double s);

struct Distortion {
  double s = 1.0;  // smallest embedded / target ratio
  double L = 1.0;  // largest embedded / target ratio
  bool is_isometry(double tolerance) const;
};

Distortion distortion(const DistanceMatrix& embedded, const DistanceMatrix& target);

/// Five-node graph A..E with unit edges {A,E},{A,D},{E,B},{B,D},{D,C}; no
/// Riemannian manifold contains it isometrically. Nodes are indexed A=0..E=4.
WeightedGraph five_node_obstruction_graph();

/// Unit-weight cycle on n nodes.
WeightedGraph cycle_graph(int n);

/// Random spanning tree plus each remaining pair with probability `extra_edge_prob`;
/// weights U[0.1, 2], coordinates U[0, 1]^2.
WeightedGraph random_connected_graph(int n, std::uint64_t seed, double extra_edge_prob = 0.3);

/// Exchange format {coords: [[...]], edges: [[i, j]], weights: [...]}.
void to_json(nlohmann::json& j, const WeightedGraph& g);
void from_json(const nlohmann::json& j, WeightedGraph& g);

/// CSV with a header row of node indices.
void write_csv(std::ostream& out, const DistanceMatrix& d);

}  // namespace snowflake
