#include "mgm/nnk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgm/parallel.hpp"

namespace mgm {

void KernelConfig::validate() const {
  if (!(ridge > 0)) throw ValidationError("ridge", "must be > 0");
  if (!(weight_threshold > 0 && weight_threshold < 1)) {
    throw ValidationError("weight_threshold", "must lie in (0, 1)");
  }
  if (!(kkt_tolerance > 0)) throw ValidationError("kkt_tolerance", "must be > 0");
}

std::size_t KernelConfig::effective_k(std::size_t view_set_size) const {
  if (view_set_size < 2) throw ValidationError("views", "view-set needs at least 2 members");
  const std::size_t cap = view_set_size - 1;
  return k_init == 0 ? std::min<std::size_t>(cap, 50) : std::min(k_init, cap);
}

double cosine_kernel(std::span<const double> a, std::span<const double> b,
                     const KernelConfig& cfg) {
  if (a.size() != b.size()) throw ValidationError("b", "dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw DegenerateError("cosine kernel of a zero-norm vector");
  double k = dot / (std::sqrt(na) * std::sqrt(nb));
  k = std::min(k, 1.0);
  return cfg.clamp_negative ? std::max(k, 0.0) : std::max(k, -1.0);
}

Eigen::MatrixXd kernel_matrix(const ViewSet& views, const KernelConfig& cfg) {
  Eigen::MatrixXd unit = views.members;
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const double norm = unit.col(j).norm();
    if (norm == 0) {
      throw DegenerateError("view-set member " + std::to_string(j) + " has zero norm");
    }
    unit.col(j) /= norm;
  }
  const Eigen::Index n = unit.cols();
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gram(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double k = std::min(unit.col(i).dot(unit.col(j)), 1.0);
      k = cfg.clamp_negative ? std::max(k, 0.0) : std::max(k, -1.0);
      gram(i, j) = gram(j, i) = k;
    }
  }
  return gram;
}

std::vector<std::size_t> knn_candidates(std::size_t query, const Eigen::MatrixXd& gram,
                                        std::size_t k) {
  const auto n = static_cast<std::size_t>(gram.rows());
  if (n < 2) throw ValidationError("views", "view-set needs at least 2 members");
  if (query >= n) throw ValidationError("query", "index out of range");
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != query) order.push_back(i);
  }
  k = std::min(k, order.size());
  const auto row = gram.row(static_cast<Eigen::Index>(query));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ka = row(static_cast<Eigen::Index>(a));
                      const double kb = row(static_cast<Eigen::Index>(b));
                      return ka != kb ? ka > kb : a < b;
                    });
  order.resize(k);
  return order;
}

std::vector<std::size_t> knn_candidates(std::size_t query, const ViewSet& views,
                                        const KernelConfig& cfg) {
  return knn_candidates(query, kernel_matrix(views, cfg), cfg.effective_k(views.size()));
}

double kkt_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                    const Eigen::VectorXd& theta) {
  const Eigen::VectorXd grad = hessian * theta - linear;
  double worst = 0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double v = theta(i) > 0 ? std::abs(grad(i)) : std::max(0.0, -grad(i));
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// Solves H_PP s = b_P with one step of iterative refinement.
Eigen::VectorXd solve_passive(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                              const std::vector<Eigen::Index>& passive) {
  const auto m = static_cast<Eigen::Index>(passive.size());
  Eigen::MatrixXd sub(m, m);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    rhs(r) = linear(passive[r]);
    for (Eigen::Index c = 0; c < m; ++c) sub(r, c) = hessian(passive[r], passive[c]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
  Eigen::VectorXd s = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !s.allFinite()) {
    s = sub.completeOrthogonalDecomposition().solve(rhs);
  } else {
    s += ldlt.solve(rhs - sub * s);
  }
  return s;
}

}  // namespace

Eigen::VectorXd nonnegative_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                               double kkt_tolerance) {
  const Eigen::Index n = linear.size();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);
  const Eigen::Index max_outer = 10 * n;

  bool converged = false;
  for (Eigen::Index outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd dual = linear - hessian * theta;
    Eigen::Index entering = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_passive[static_cast<std::size_t>(i)]) continue;
      if (entering < 0 || dual(i) > dual(entering)) entering = i;
    }
    if (entering < 0 || dual(entering) <= kkt_tolerance) {
      converged = true;
      break;
    }
    in_passive[static_cast<std::size_t>(entering)] = true;

    for (Eigen::Index inner = 0; inner <= n; ++inner) {
      std::vector<Eigen::Index> passive;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in_passive[static_cast<std::size_t>(i)]) passive.push_back(i);
      }
      if (passive.empty()) break;
      const Eigen::VectorXd s = solve_passive(hessian, linear, passive);
      if ((s.array() > 0).all()) {
        theta.setZero();
        for (std::size_t r = 0; r < passive.size(); ++r) theta(passive[r]) = s(static_cast<Eigen::Index>(r));
        break;
      }
      // Step toward s until the first passive coordinate hits zero.
      double alpha = 1;
      Eigen::Index blocking = -1;
      for (std::size_t r = 0; r < passive.size(); ++r) {
        const double sr = s(static_cast<Eigen::Index>(r));
        const double tr = theta(passive[r]);
        if (sr <= 0) {
          const double a = tr / (tr - sr);
          if (blocking < 0 || a < alpha) {
            alpha = a;
            blocking = passive[r];
          }
        }
      }
      for (std::size_t r = 0; r < passive.size(); ++r) {
        const Eigen::Index i = passive[r];
        theta(i) += alpha * (s(static_cast<Eigen::Index>(r)) - theta(i));
        if (i == blocking || theta(i) <= 0) {
          theta(i) = 0;
          in_passive[static_cast<std::size_t>(i)] = false;
        }
      }
      // The entering coordinate was rejected at once: no descent is available
      // along it, so the current point is stationary up to rounding.
      if (!in_passive[static_cast<std::size_t>(entering)] && alpha == 0) {
        converged = true;
        break;
      }
    }
    if (converged) break;
  }

  const double residual = kkt_residual(hessian, linear, theta);
  if (!converged || residual > kkt_tolerance) {
    throw SolverError("non-negative QP did not reach stationarity (KKT residual " +
                          std::to_string(residual) + ")",
                      residual);
  }
  return theta;
}

Neighborhood nnk_solve(std::size_t query, std::span<const std::size_t> candidates,
                       const Eigen::MatrixXd& gram, const KernelConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(gram.rows());
  if (candidates.empty()) throw ValidationError("candidates", "must be non-empty");
  if (query >= n) throw ValidationError("query", "index out of range");
  std::vector<bool> seen(n, false);
  for (auto c : candidates) {
    if (c >= n) throw ValidationError("candidates", "index out of range");
    if (c == query) throw ValidationError("candidates", "must exclude the query");
    if (seen[c]) throw ValidationError("candidates", "must be distinct");
    seen[c] = true;
  }

  const auto m = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd hessian(m, m);
  Eigen::VectorXd linear(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto cr = static_cast<Eigen::Index>(candidates[static_cast<std::size_t>(r)]);
    linear(r) = gram(cr, static_cast<Eigen::Index>(query));
    for (Eigen::Index c = 0; c < m; ++c) {
      hessian(r, c) = gram(cr, static_cast<Eigen::Index>(candidates[static_cast<std::size_t>(c)]));
    }
    hessian(r, r) += cfg.ridge;
  }

  Neighborhood nb;
  nb.query = query;
  nb.candidates.assign(candidates.begin(), candidates.end());
  nb.kernel_row.assign(linear.data(), linear.data() + m);

  const Eigen::VectorXd theta = nonnegative_qp(hessian, linear, cfg.kkt_tolerance);
  nb.solution.assign(theta.data(), theta.data() + m);

  const double top = theta.maxCoeff();
  if (!(top > 0)) {
    nb.isolated = true;
    nb.neighbors.push_back(candidates.front());
    nb.weights.push_back(0.0);
    return nb;
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    if (theta(r) > cfg.weight_threshold * top) {
      nb.neighbors.push_back(candidates[static_cast<std::size_t>(r)]);
      nb.weights.push_back(theta(r));
    }
  }
  return nb;
}

Neighborhood nnk_solve(std::size_t query, std::span<const std::size_t> candidates,
                       const ViewSet& views, const KernelConfig& cfg) {
  return nnk_solve(query, candidates, kernel_matrix(views, cfg), cfg);
}

NNKGraph build_graph(const ViewSet& views, const KernelConfig& cfg, std::size_t jobs) {
  cfg.validate();
  const std::size_t n = views.size();
  const std::size_t k = cfg.effective_k(n);
  const Eigen::MatrixXd gram = kernel_matrix(views, cfg);

  NNKGraph graph;
  graph.config = cfg;
  graph.neighborhoods.resize(n);
  parallel_for(n, jobs, [&](std::size_t q) {
    const auto candidates = knn_candidates(q, gram, k);
    try {
      graph.neighborhoods[q] = nnk_solve(q, candidates, gram, cfg);
    } catch (const SolverError& e) {
      throw SolverError("node " + std::to_string(q) + ": " + e.what(), e.residual());
    }
  });
  return graph;
}

}  // namespace mgm
