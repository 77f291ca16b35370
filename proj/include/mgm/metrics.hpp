#pragma once

// Manifold graph metrics computed from NNK neighborhoods:
//   equivariance      diameter of the neighbor polytope on the unit sphere, in [0, 2]
//   affinity          principal-angle alignment of neighboring subspaces, in [0, 1]
//   nb. of neighbors  neighborhood cardinality (local intrinsic dimension)

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgm/embedding_store.hpp"
#include "mgm/nnk.hpp"

namespace mgm {

struct SubspaceBasis {
  Eigen::MatrixXd basis;  // D x rank, orthonormal columns
  std::size_t declared_count = 0;

  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }
};

enum class Normalization {
  /// sqrt(sum cos^2 / (n_a * n_b)) with the declared neighbor counts.
  kPaper,
  /// sqrt(sum cos^2 / min(rank_a, rank_b)).
  kMin,
};

Normalization parse_normalization(const std::string& text);
std::string to_string(Normalization n);

struct NodeMetrics {
  double diameter = 0;
  std::size_t intrinsic_dim = 0;
};

struct EdgeAffinity {
  std::size_t from = 0;
  std::size_t to = 0;
  double affinity = 0;
};

struct GraphMetrics {
  std::vector<NodeMetrics> nodes;
  std::vector<EdgeAffinity> edges;
  /// Edges dropped because one endpoint's subspace was degenerate.
  std::size_t skipped_edges = 0;
};

double polytope_diameter(const Neighborhood& nb, const ViewSet& views);

SubspaceBasis neighbor_subspace(const Neighborhood& nb, const ViewSet& views);

/// Orthonormal basis of the span of the l2-normalized columns; directions with
/// singular value <= 1e-8 * max are dropped.
SubspaceBasis span_basis(const Eigen::MatrixXd& vectors);

/// Cosines of the principal angles between the two subspaces, descending.
Eigen::VectorXd principal_cosines(const SubspaceBasis& a, const SubspaceBasis& b);

double subspace_affinity(const SubspaceBasis& a, const SubspaceBasis& b,
                         Normalization normalization = Normalization::kPaper);

GraphMetrics graph_metrics(const NNKGraph& graph, const ViewSet& views,
                           Normalization normalization = Normalization::kPaper);

/// Affinity between the semantic-graph subspace of `item` and the subspace of
/// the item's view 0 in its augmentation graph.
double cross_affinity(const NNKGraph& aug_graph, const ViewSet& aug_views,
                      const NNKGraph& sem_graph, const ViewSet& sem_views, std::size_t item,
                      Normalization normalization = Normalization::kPaper);

namespace metric {
inline constexpr const char* kEquivariance = "Equivariance";
inline constexpr const char* kAffinity = "Affinity";
inline constexpr const char* kNeighbors = "Nb. of neighbors";
}  // namespace metric

struct MetricDistribution {
  std::string metric;
  /// One policy id, or two for a cross term ("Sem", "Augs").
  std::vector<std::string> policies;
  std::vector<double> values;
  double mean = 0;
  double spread = 0;  // population standard deviation

  std::string policy_label() const;
};

MetricDistribution aggregate(std::vector<double> values, std::string metric,
                             std::vector<std::string> policies);

struct NamedFeature {
  std::string name;
  double value = 0;
};

/// Names of the model feature vector, in order: for each of Sem, Augs, Crop,
/// Colorjit, Rotate the five statistics Equivariance, Equivariance spread,
/// Affinity, Affinity spread, Nb. of neighbors; then the Sem-Augs affinity and
/// its spread. 27 entries.
const std::vector<std::string>& feature_names();

/// Builds the feature vector from a model's distributions. Throws InputError
/// naming the first missing "policy/metric" pair.
std::vector<NamedFeature> feature_vector(const std::vector<MetricDistribution>& distributions);

}  // namespace mgm
