#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mgm/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mgm;
using doctest::Approx;

namespace {

Neighborhood with_neighbors(std::vector<std::size_t> idx) {
  Neighborhood nb;
  nb.query = 999;
  nb.neighbors = std::move(idx);
  nb.weights.assign(nb.neighbors.size(), 1.0);
  return nb;
}

SubspaceBasis basis_of(std::initializer_list<Eigen::VectorXd> cols) {
  Eigen::MatrixXd m(cols.begin()->size(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index j = 0;
  for (const auto& c : cols) m.col(j++) = c;
  return span_basis(m);
}

Eigen::VectorXd e(Eigen::Index i, Eigen::Index d = 3) { return Eigen::VectorXd::Unit(d, i); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

TEST_CASE("polytope diameter examples") {
  Eigen::MatrixXd pts(2, 3);
  pts << 1, -1, 0,  //
      0, 0, 1;
  const auto views = test::make_views(pts);
  CHECK(polytope_diameter(with_neighbors({0, 1}), views) == Approx(2.0).epsilon(1e-15));
  CHECK(polytope_diameter(with_neighbors({0, 2}), views) == Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(polytope_diameter(with_neighbors({2}), views) == 0.0);

  const Eigen::MatrixXd same = Eigen::VectorXd::LinSpaced(4, 1, 4).replicate(1, 50);
  const auto g = build_graph(test::make_views(same));
  for (const auto& nb : g.neighborhoods) CHECK(polytope_diameter(nb, test::make_views(same)) == 0.0);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  zero(0, 0) = 1;
  CHECK_THROWS_AS(polytope_diameter(with_neighbors({0, 1}), test::make_views(zero)), DegenerateError);
}

TEST_CASE("neighbor subspace rank and basis") {
  Eigen::MatrixXd pts(2, 4);
  pts << 2, 0, 1, 2,  //
      0, 3, 0, 0;
  const auto views = test::make_views(pts);
  const auto b = neighbor_subspace(with_neighbors({0, 1}), views);
  CHECK(b.rank() == 2);
  CHECK(b.declared_count == 2);
  // Axes up to sign and order.
  const Eigen::MatrixXd abs = b.basis.cwiseAbs();
  CHECK(abs.colwise().maxCoeff().minCoeff() == Approx(1.0));
  CHECK((b.basis.transpose() * b.basis - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-10);

  const auto c = neighbor_subspace(with_neighbors({2, 3}), views);
  CHECK(c.rank() == 1);
  CHECK(c.declared_count == 2);

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd span = test::gaussian(10, 3, rng);
    const Eigen::MatrixXd five = span * test::gaussian(3, 5, rng);
    const auto vs = test::make_views(five);
    const auto sb = neighbor_subspace(with_neighbors({0, 1, 2, 3, 4}), vs);
    Eigen::MatrixXd unit = five;
    for (Eigen::Index j = 0; j < 5; ++j) unit.col(j).normalize();
    CHECK(static_cast<Eigen::Index>(sb.rank()) == oracle::numerical_rank(unit));
    CHECK(sb.rank() == 3);
  }
}

TEST_CASE("subspace affinity anchors") {
  const auto xy = basis_of({e(0), e(1)});
  const auto xz = basis_of({e(0), e(2)});
  const auto z = basis_of({e(2)});
  const auto x = basis_of({e(0)});

  CHECK(subspace_affinity(xy, xy, Normalization::kMin) == Approx(1.0).epsilon(1e-12));
  // The count-normalized form gives 1 for identical subspaces only when each
  // neighborhood has one vertex; two orthonormal vertices give sqrt(2 / 4).
  CHECK(subspace_affinity(xy, xy, Normalization::kPaper) == Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(subspace_affinity(x, x, Normalization::kPaper) == Approx(1.0).epsilon(1e-12));

  CHECK(subspace_affinity(xy, z, Normalization::kPaper) == Approx(0.0));
  CHECK(subspace_affinity(xy, z, Normalization::kMin) == Approx(0.0));

  // Independent route: principal angles by full SVD of the raw vectors.
  Eigen::MatrixXd a(3, 2), b(3, 2);
  a << e(0), e(1);
  b << e(0), e(2);
  const double oracle_sum = oracle::principal_cosines_svd(a, b).squaredNorm();
  CHECK(std::sqrt(oracle_sum / 4) == Approx(0.5).epsilon(1e-12));
  CHECK(subspace_affinity(xy, xz, Normalization::kPaper) == Approx(std::sqrt(oracle_sum / 4)).epsilon(1e-12));
  CHECK(subspace_affinity(xy, xz, Normalization::kMin) == Approx(std::sqrt(oracle_sum / 2)).epsilon(1e-12));
}

TEST_CASE("affinity properties: bounds and symmetry") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 6;
    const auto a = span_basis(test::gaussian(d, 1 + trial % 4, rng));
    const auto b = span_basis(test::gaussian(d, 1 + (trial / 4) % 4, rng));
    for (auto mode : {Normalization::kPaper, Normalization::kMin}) {
      const double ab = subspace_affinity(a, b, mode);
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
      CHECK(std::abs(ab - subspace_affinity(b, a, mode)) <= 1e-10);
    }
    CHECK(subspace_affinity(a, a, Normalization::kMin) == Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("graph metrics on forced and collapsed graphs") {
  Eigen::MatrixXd two(3, 2);
  two << 1, 0.2,  //
      0.3, 1,     //
      0.1, 0.5;
  const auto v2 = test::make_views(two);
  const auto m2 = graph_metrics(build_graph(v2), v2);
  REQUIRE(m2.nodes.size() == 2);
  for (const auto& n : m2.nodes) {
    CHECK(n.diameter == 0.0);
    CHECK(n.intrinsic_dim == 1);
  }
  REQUIRE(m2.edges.size() == 2);
  CHECK(m2.edges[0].affinity == Approx(two.col(0).normalized().dot(two.col(1).normalized())));

  const Eigen::MatrixXd same = Eigen::VectorXd::LinSpaced(5, 0.5, 2).replicate(1, 50);
  const auto vs = test::make_views(same);
  const auto m50 = graph_metrics(build_graph(vs), vs);
  for (const auto& n : m50.nodes) CHECK(n.diameter == 0.0);
  CHECK(m50.skipped_edges == 0);
}

TEST_CASE("intrinsic dim equals neighborhood cardinality and grows with subspace dimension") {
  std::mt19937_64 rng(17);
  std::vector<double> medians;
  for (Eigen::Index d : {2, 3, 5}) {
    std::vector<double> per_set;
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(test::gaussian(20, d, rng));
      const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(20, d);
      const auto vs = test::make_views(basis * test::abs_gaussian(d, 50, rng));
      const auto g = build_graph(vs);
      const auto m = graph_metrics(g, vs);
      std::vector<double> ids;
      for (std::size_t t = 0; t < m.nodes.size(); ++t) {
        CHECK(m.nodes[t].intrinsic_dim == g.neighborhoods[t].neighbors.size());
        ids.push_back(static_cast<double>(m.nodes[t].intrinsic_dim));
      }
      per_set.push_back(median(ids));
    }
    medians.push_back(median(per_set));
  }
  CHECK(medians[0] < medians[1]);
  CHECK(medians[1] < medians[2]);
}

TEST_CASE("metrics are invariant to a global rotation and diameters to scaling") {
  std::mt19937_64 rng(8);
  KernelConfig cfg;
  cfg.clamp_negative = false;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd pts = test::gaussian(6, 12, rng);
    const Eigen::MatrixXd rot = test::random_orthogonal(6, rng);
    const auto a = test::make_views(pts);
    const auto b = test::make_views(rot * pts);
    const auto c = test::make_views(pts * 3.7);
    const auto ga = build_graph(a, cfg), gb = build_graph(b, cfg), gc = build_graph(c, cfg);
    const auto ma = graph_metrics(ga, a), mb = graph_metrics(gb, b), mc = graph_metrics(gc, c);
    REQUIRE(ma.edges.size() == mb.edges.size());
    for (std::size_t t = 0; t < ma.nodes.size(); ++t) {
      CHECK(ma.nodes[t].intrinsic_dim == mb.nodes[t].intrinsic_dim);
      CHECK(std::abs(ma.nodes[t].diameter - mb.nodes[t].diameter) <= 1e-8);
      CHECK(std::abs(ma.nodes[t].diameter - mc.nodes[t].diameter) <= 1e-8);
      CHECK(ma.nodes[t].diameter >= 0.0);
      CHECK(ma.nodes[t].diameter <= 2.0);
    }
    for (std::size_t k = 0; k < ma.edges.size(); ++k) {
      CHECK(std::abs(ma.edges[k].affinity - mb.edges[k].affinity) <= 1e-8);
    }
  }
}

TEST_CASE("cross affinity: identical and orthogonal subspaces") {
  // Semantic view-set: items 0, 1, 2 with one view each.
  Eigen::MatrixXd sem_pts(3, 3);
  sem_pts << 1, 1, 0,  //
      0.1, 0, 0,       //
      0, 0, 1;
  ViewSet sem;
  sem.members = sem_pts;
  sem.sources = {{0, 0}, {1, 0}, {2, 0}};
  NNKGraph sem_graph;
  sem_graph.neighborhoods = {with_neighbors({1}), with_neighbors({0}), with_neighbors({0})};

  // Augmentation view-set of item 0: view 0's neighbor points along the same
  // direction as item 1 in the semantic graph.
  Eigen::MatrixXd aug_pts(3, 3);
  aug_pts << 1, 2, 0,  //
      0.1, 0, 0,       //
      0, 0, 1;
  ViewSet aug;
  aug.members = aug_pts;
  aug.sources = {{0, 0}, {0, 1}, {0, 2}};
  NNKGraph aug_graph;
  aug_graph.neighborhoods = {with_neighbors({1}), with_neighbors({0}), with_neighbors({0})};
  CHECK(cross_affinity(aug_graph, aug, sem_graph, sem, 0) == Approx(1.0).epsilon(1e-12));

  aug_graph.neighborhoods[0] = with_neighbors({2});
  CHECK(cross_affinity(aug_graph, aug, sem_graph, sem, 0) == Approx(0.0));

  CHECK_THROWS_AS(cross_affinity(aug_graph, aug, sem_graph, sem, 5), InputError);
}

TEST_CASE("aggregate: mean and population spread") {
  auto d = aggregate({0, 2}, metric::kEquivariance, {"Augs"});
  CHECK(d.mean == 1.0);
  CHECK(d.spread == 1.0);
  d = aggregate({0.3, 0.3, 0.3}, metric::kAffinity, {"Crop"});
  CHECK(d.mean == Approx(0.3));
  CHECK(d.spread == Approx(0.0));
  d = aggregate({1, 2, 3, 4}, metric::kAffinity, {"Sem", "Augs"});
  CHECK(d.mean == 2.5);
  CHECK(d.spread == Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(d.policy_label() == "Sem-Augs");
  CHECK_THROWS_AS(aggregate({}, metric::kAffinity, {"Crop"}), ValidationError);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> v(1000);
  for (auto& x : v) x = normal(rng);
  d = aggregate(v, metric::kAffinity, {"Crop"});
  double mean = 0;
  for (double x : v) mean += x;
  mean /= 1000;
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  CHECK(std::abs(d.mean - mean) <= 1e-12);
  CHECK(std::abs(d.spread - std::sqrt(var / 1000)) <= 1e-12);
}

TEST_CASE("feature vector schema") {
  const auto& names = feature_names();
  REQUIRE(names.size() == 27);
  CHECK(names[0] == "Sem/Equivariance");
  CHECK(names[1] == "Sem/Equivariance spread");
  CHECK(names[4] == "Sem/Nb. of neighbors");
  CHECK(names[22] == "Rotate/Affinity");
  CHECK(names[25] == "Sem-Augs/Affinity");
  CHECK(names[26] == "Sem-Augs/Affinity spread");

  std::vector<MetricDistribution> dists;
  double k = 0;
  for (const char* p : {"Sem", "Augs", "Crop", "Colorjit", "Rotate"}) {
    dists.push_back(aggregate({k, k + 2}, metric::kEquivariance, {p}));
    dists.push_back(aggregate({k + 0.5}, metric::kAffinity, {p}));
    dists.push_back(aggregate({3, 5}, metric::kNeighbors, {p}));
    k += 1;
  }
  dists.push_back(aggregate({0.8, 0.6}, metric::kAffinity, {"Sem", "Augs"}));
  const auto fv = feature_vector(dists);
  REQUIRE(fv.size() == 27);
  CHECK(fv[0].value == 1.0);  // Sem equivariance mean of {0, 2}
  CHECK(fv[1].value == 1.0);  // spread
  CHECK(fv[4].value == 4.0);  // Nb. of neighbors = mean, no spread feature
  CHECK(fv[25].value == Approx(0.7));
  for (std::size_t i = 0; i < fv.size(); ++i) CHECK(fv[i].name == names[i]);

  std::erase_if(dists, [](const MetricDistribution& d) {
    return d.policy_label() == "Rotate" && d.metric == metric::kAffinity;
  });
  try {
    feature_vector(dists);
    FAIL("expected missing distribution");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("Rotate/Affinity") != std::string::npos);
  }
}
