#include "mgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace mgm {
namespace {

Eigen::MatrixXd normalized_neighbors(const Neighborhood& nb, const ViewSet& views) {
  if (nb.neighbors.empty()) throw ValidationError("neighbors", "neighborhood is empty");
  Eigen::MatrixXd out(views.members.rows(), static_cast<Eigen::Index>(nb.neighbors.size()));
  for (std::size_t c = 0; c < nb.neighbors.size(); ++c) {
    if (nb.neighbors[c] >= views.size()) throw ValidationError("neighbors", "index out of range");
    out.col(static_cast<Eigen::Index>(c)) = views.members.col(static_cast<Eigen::Index>(nb.neighbors[c]));
  }
  return out;
}

void normalize_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double norm = m.col(j).norm();
    if (norm == 0) throw DegenerateError("zero-norm neighbor vector");
    m.col(j) /= norm;
  }
}

}  // namespace

Normalization parse_normalization(const std::string& text) {
  if (text == "paper") return Normalization::kPaper;
  if (text == "min") return Normalization::kMin;
  throw ValidationError("normalization", "expected 'paper' or 'min', got '" + text + "'");
}

std::string to_string(Normalization n) { return n == Normalization::kPaper ? "paper" : "min"; }

double polytope_diameter(const Neighborhood& nb, const ViewSet& views) {
  Eigen::MatrixXd unit = normalized_neighbors(nb, views);
  normalize_columns(unit);
  double best = 0;
  for (Eigen::Index k = 0; k < unit.cols(); ++k) {
    for (Eigen::Index l = k + 1; l < unit.cols(); ++l) {
      best = std::max(best, (unit.col(k) - unit.col(l)).norm());
    }
  }
  return std::min(best, 2.0);
}

SubspaceBasis span_basis(const Eigen::MatrixXd& vectors) {
  if (vectors.cols() == 0) throw ValidationError("neighbors", "no vectors to span");
  Eigen::MatrixXd unit = vectors;
  normalize_columns(unit);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(unit, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 1e-12) throw DegenerateError("neighbor subspace is degenerate");
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-8 * sv(0)) ++rank;
  SubspaceBasis out;
  out.basis = svd.matrixU().leftCols(rank);
  out.declared_count = static_cast<std::size_t>(vectors.cols());
  return out;
}

SubspaceBasis neighbor_subspace(const Neighborhood& nb, const ViewSet& views) {
  return span_basis(normalized_neighbors(nb, views));
}

Eigen::VectorXd principal_cosines(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.basis.rows() != b.basis.rows()) throw ValidationError("basis", "dimension mismatch");
  const Eigen::MatrixXd cross = a.basis.transpose() * b.basis;
  Eigen::VectorXd cosines = Eigen::JacobiSVD<Eigen::MatrixXd>(cross).singularValues();
  return cosines.cwiseMin(1.0);
}

double subspace_affinity(const SubspaceBasis& a, const SubspaceBasis& b,
                         Normalization normalization) {
  const Eigen::VectorXd cosines = principal_cosines(a, b);
  const double sum_sq = cosines.squaredNorm();
  const double denom = normalization == Normalization::kPaper
                           ? static_cast<double>(a.declared_count) * static_cast<double>(b.declared_count)
                           : static_cast<double>(std::min(a.rank(), b.rank()));
  if (!(denom > 0)) throw ValidationError("basis", "empty subspace");
  return std::clamp(std::sqrt(sum_sq / denom), 0.0, 1.0);
}

GraphMetrics graph_metrics(const NNKGraph& graph, const ViewSet& views,
                           Normalization normalization) {
  const std::size_t n = graph.neighborhoods.size();
  if (n != views.size()) throw ValidationError("graph", "node count differs from view-set size");

  GraphMetrics out;
  out.nodes.resize(n);
  std::vector<std::optional<SubspaceBasis>> subspaces(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& nb = graph.neighborhoods[t];
    out.nodes[t].diameter = polytope_diameter(nb, views);
    out.nodes[t].intrinsic_dim = nb.neighbors.size();
    try {
      subspaces[t] = neighbor_subspace(nb, views);
    } catch (const DegenerateError&) {
      // edges touching this node are counted in skipped_edges below
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (auto u : graph.neighborhoods[t].neighbors) {
      if (!subspaces[t] || !subspaces[u]) {
        ++out.skipped_edges;
        continue;
      }
      out.edges.push_back({t, u, subspace_affinity(*subspaces[t], *subspaces[u], normalization)});
    }
  }
  return out;
}

double cross_affinity(const NNKGraph& aug_graph, const ViewSet& aug_views,
                      const NNKGraph& sem_graph, const ViewSet& sem_views, std::size_t item,
                      Normalization normalization) {
  const auto find = [](const ViewSet& views, auto pred) -> std::optional<std::size_t> {
    for (std::size_t j = 0; j < views.sources.size(); ++j) {
      if (pred(views.sources[j])) return j;
    }
    return std::nullopt;
  };
  const auto sem_node = find(sem_views, [&](auto s) { return s.first == item; });
  const auto aug_node = find(aug_views, [&](auto s) { return s.first == item && s.second == 0; });
  if (!sem_node) throw InputError("item " + std::to_string(item) + " absent from semantic graph");
  if (!aug_node) throw InputError("item " + std::to_string(item) + " absent from augmentation graph");
  if (sem_graph.neighborhoods.size() != sem_views.size() ||
      aug_graph.neighborhoods.size() != aug_views.size()) {
    throw ValidationError("graph", "node count differs from view-set size");
  }
  const auto sem = neighbor_subspace(sem_graph.neighborhoods[*sem_node], sem_views);
  const auto aug = neighbor_subspace(aug_graph.neighborhoods[*aug_node], aug_views);
  return subspace_affinity(sem, aug, normalization);
}

std::string MetricDistribution::policy_label() const {
  std::string out;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (i) out += '-';
    out += policies[i];
  }
  return out;
}

MetricDistribution aggregate(std::vector<double> values, std::string metric,
                             std::vector<std::string> policies) {
  if (values.empty()) throw ValidationError("values", "cannot aggregate an empty distribution");
  MetricDistribution d;
  d.metric = std::move(metric);
  d.policies = std::move(policies);
  const double count = static_cast<double>(values.size());
  double sum = 0;
  for (double v : values) sum += v;
  d.mean = sum / count;
  double sq = 0;
  for (double v : values) sq += (v - d.mean) * (v - d.mean);
  d.spread = std::sqrt(sq / count);
  d.values = std::move(values);
  return d;
}

namespace {

const std::vector<std::string> kFeaturePolicies = {policy::kSem, policy::kAugs, policy::kCrop,
                                                   policy::kColorjit, policy::kRotate};

struct FeatureSource {
  std::string policy;  // label, e.g. "Sem" or "Sem-Augs"
  std::string metric;
  bool spread = false;
};

const std::vector<FeatureSource>& feature_sources() {
  static const std::vector<FeatureSource> sources = [] {
    std::vector<FeatureSource> s;
    for (const auto& p : kFeaturePolicies) {
      s.push_back({p, metric::kEquivariance, false});
      s.push_back({p, metric::kEquivariance, true});
      s.push_back({p, metric::kAffinity, false});
      s.push_back({p, metric::kAffinity, true});
      s.push_back({p, metric::kNeighbors, false});
    }
    const std::string cross = std::string(policy::kSem) + "-" + policy::kAugs;
    s.push_back({cross, metric::kAffinity, false});
    s.push_back({cross, metric::kAffinity, true});
    return s;
  }();
  return sources;
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : feature_sources()) {
      n.push_back(s.policy + "/" + s.metric + (s.spread ? " spread" : ""));
    }
    return n;
  }();
  return names;
}

std::vector<NamedFeature> feature_vector(const std::vector<MetricDistribution>& distributions) {
  std::map<std::pair<std::string, std::string>, const MetricDistribution*> index;
  for (const auto& d : distributions) index.emplace(std::pair{d.policy_label(), d.metric}, &d);

  std::vector<NamedFeature> out;
  const auto& names = feature_names();
  const auto& sources = feature_sources();
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    const auto it = index.find({s.policy, s.metric});
    if (it == index.end()) throw InputError("missing distribution " + s.policy + "/" + s.metric);
    out.push_back({names[i], s.spread ? it->second->spread : it->second->mean});
  }
  return out;
}

}  // namespace mgm
