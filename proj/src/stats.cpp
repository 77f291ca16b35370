#include "mgm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

namespace mgm {

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != model_ids.size()) {
    throw ValidationError("model_ids", "row count mismatch");
  }
  if (static_cast<std::size_t>(values.cols()) != feature_names.size()) {
    throw ValidationError("feature_names", "column count mismatch");
  }
  if (!values.allFinite()) throw ValidationError("values", "contains NaN or Inf");
}

FeatureMatrix standardize(const FeatureMatrix& m) {
  m.validate();
  if (m.values.rows() < 2) throw ValidationError("values", "standardize needs at least 2 rows");
  FeatureMatrix out = m;
  out.standardized = true;
  out.constant_columns.assign(static_cast<std::size_t>(m.values.cols()), false);
  const double rows = static_cast<double>(m.values.rows());
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
    auto col = out.values.col(j);
    const double mean = col.sum() / rows;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / rows);
    // Treat variance at rounding level of the column magnitude as constant.
    const double scale = std::max(1.0, m.values.col(j).cwiseAbs().maxCoeff());
    if (sd <= 1e-12 * scale) {
      col.setZero();
      out.constant_columns[static_cast<std::size_t>(j)] = true;
    } else {
      col /= sd;
    }
  }
  return out;
}

SparsePcaResult sparse_pca(const FeatureMatrix& m, std::size_t n_components, double l1_penalty) {
  m.validate();
  if (l1_penalty < 0) throw ValidationError("l1_penalty", "must be >= 0");
  const Eigen::Index features = m.values.cols();
  if (n_components < 1 || static_cast<Eigen::Index>(n_components) > features) {
    throw ValidationError("n_components", "must lie in [1, number of features]");
  }
  constexpr int kMaxIterations = 10000;
  constexpr double kTolerance = 1e-12;

  const Eigen::MatrixXd& x0 = m.values;
  Eigen::MatrixXd x = x0;
  SparsePcaResult out;
  out.loadings = Eigen::MatrixXd::Zero(features, static_cast<Eigen::Index>(n_components));

  const auto soft = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd v = z;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double a = std::abs(z(i)) - l1_penalty;
      v(i) = a > 0 ? std::copysign(a, z(i)) : 0.0;
    }
    if (v.squaredNorm() == 0 && z.size() > 0) {
      // Penalty above every entry: keep the single strongest loading.
      Eigen::Index best;
      z.cwiseAbs().maxCoeff(&best);
      v(best) = z(best) >= 0 ? 1.0 : -1.0;
    }
    return v;
  };
  // Unit vector orthogonal to the loadings found so far.
  const auto orthogonal_fallback = [&](Eigen::Index upto) {
    for (Eigen::Index e = 0; e < features; ++e) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(features, e);
      for (Eigen::Index c = 0; c < upto; ++c) v -= out.loadings.col(c).dot(v) * out.loadings.col(c);
      if (v.norm() > 1e-8) return Eigen::VectorXd(v.normalized());
    }
    return Eigen::VectorXd(Eigen::VectorXd::Unit(features, 0));
  };

  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n_components); ++c) {
    const Eigen::MatrixXd gram = x.transpose() * x;
    Eigen::VectorXd v;
    int iter = 0;
    Eigen::Index start;
    if (gram.colwise().norm().maxCoeff(&start) <= 1e-14) {
      v = orthogonal_fallback(c);
    } else {
      v = gram.col(start).normalized();
      bool converged = false;
      for (; iter < kMaxIterations; ++iter) {
        Eigen::VectorXd u = x * v;
        const double un = u.norm();
        if (un <= 1e-14) break;
        u /= un;
        const Eigen::VectorXd next = soft(x.transpose() * u).normalized();
        const double change = (next - v).norm();
        v = next;
        if (change <= kTolerance) {
          converged = true;
          break;
        }
      }
      if (!converged && iter == kMaxIterations) {
        throw NumericalError("sparse PCA did not converge for component " + std::to_string(c));
      }
    }
    Eigen::Index biggest;
    v.cwiseAbs().maxCoeff(&biggest);
    if (v(biggest) < 0) v = -v;
    out.loadings.col(c) = v;
    out.iterations.push_back(iter);
    x -= (x * v) * v.transpose();
  }

  out.projections = x0 * out.loadings;
  const double total = x0.squaredNorm();
  out.explained_variance_ratio = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_components));
  if (total > 0) {
    for (Eigen::Index c = 0; c < out.projections.cols(); ++c) {
      out.explained_variance_ratio(c) = out.projections.col(c).squaredNorm() / total;
    }
  }
  return out;
}

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (rows.row(i) - rows.row(j)).norm();
  }
  return d;
}

Dendrogram complete_linkage(const Eigen::MatrixXd& dist) {
  const Eigen::Index n = dist.rows();
  if (dist.cols() != n) throw ValidationError("dist", "must be square");
  if (n < 1) throw ValidationError("dist", "must be non-empty");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dist(i, i) != 0) throw ValidationError("dist", "diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(dist(i, j))) throw ValidationError("dist", "non-finite entry");
      if (dist(i, j) < 0) throw ValidationError("dist", "negative entry");
      if (dist(i, j) != dist(j, i)) throw ValidationError("dist", "matrix is not symmetric");
    }
  }

  const auto leaves = static_cast<std::size_t>(n);
  Dendrogram out;
  out.leaves = leaves;
  // Distances between active clusters, indexed by cluster id.
  const std::size_t total = 2 * leaves - 1;
  std::vector<std::vector<double>> d(total, std::vector<double>(total, 0.0));
  for (std::size_t i = 0; i < leaves; ++i) {
    for (std::size_t j = 0; j < leaves; ++j) {
      d[i][j] = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  std::vector<std::size_t> active(leaves);
  std::iota(active.begin(), active.end(), 0);
  std::vector<std::size_t> sizes(total, 1);

  for (std::size_t step = 0; step + 1 < leaves; ++step) {
    std::size_t best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const double v = d[active[x]][active[y]];
        if (v < best) {
          best = v;
          best_a = x;
          best_b = y;
        }
      }
    }
    const std::size_t a = active[best_a], b = active[best_b];
    const std::size_t merged = leaves + step;
    sizes[merged] = sizes[a] + sizes[b];
    out.merges.push_back({a, b, best, sizes[merged]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
    for (auto c : active) d[merged][c] = d[c][merged] = std::max(d[a][c], d[b][c]);
    active.push_back(merged);
  }
  return out;
}

std::vector<std::size_t> Dendrogram::leaf_order() const {
  std::vector<std::size_t> order;
  if (leaves == 0) return order;
  if (merges.empty()) return {0};
  std::function<void(std::size_t)> walk = [&](std::size_t id) {
    if (id < leaves) {
      order.push_back(id);
      return;
    }
    const auto& m = merges[id - leaves];
    walk(m.a);
    walk(m.b);
  };
  walk(leaves + merges.size() - 1);
  return order;
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw ValidationError("n", "p-value needs at least 3 samples");
  const double dof = static_cast<double>(n - 2);
  const double r2 = std::min(r * r, 1.0);
  if (r2 >= 1.0) return 0.0;
  const double t2 = r2 * dof / (1.0 - r2);
  // P(|T| > t) = I_{dof / (dof + t^2)}(dof / 2, 1 / 2)
  return std::clamp(boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t2)), 0.0, 1.0);
}

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("y", "length differs from x");
  if (x.size() < 3) throw ValidationError("x", "pearson needs at least 3 samples");
  const std::size_t n = x.size();
  const auto mean = [n](const std::vector<double>& v) {
    double s = 0;
    for (double e : v) s += e;
    return s / static_cast<double>(n);
  };
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw NumericalError("correlation undefined for a constant input");
  CorrelationResult out;
  out.count = n;
  out.pearson_r = std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
  out.p_value = pearson_p_value(out.pearson_r, n);
  return out;
}

namespace {

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_target(const FeatureMatrix& m, const std::vector<double>& target) {
  m.validate();
  if (target.size() != static_cast<std::size_t>(m.values.rows())) {
    throw ValidationError("target", "length differs from model count");
  }
  for (double t : target) {
    if (!std::isfinite(t)) throw ValidationError("target", "contains NaN or Inf");
  }
}

}  // namespace

double lasso_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double lambda) {
  const double rows = static_cast<double>(x.rows());
  return 0.5 * (y - x * beta).squaredNorm() / rows + lambda * beta.lpNorm<1>();
}

RegressionResult lasso(const FeatureMatrix& m, const std::vector<double>& target, double lambda,
                       const std::vector<double>* warm_start) {
  check_target(m, target);
  if (lambda < 0) throw ValidationError("lambda", "must be >= 0");
  constexpr std::size_t kMaxSweeps = 100000;
  constexpr double kTolerance = 1e-9;

  const Eigen::MatrixXd& x = m.values;
  const double rows = static_cast<double>(x.rows());
  const Eigen::Index features = x.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(features);
  if (warm_start) {
    if (warm_start->size() != static_cast<std::size_t>(features)) {
      throw ValidationError("warm_start", "length differs from feature count");
    }
    beta = to_vector(*warm_start);
  }
  const Eigen::VectorXd y = to_vector(target);
  Eigen::VectorXd residual = y - x * beta;
  const Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose() / rows;

  // Nearly collinear columns (or more active columns than the rank allows)
  // make coordinate descent crawl along a flat valley. Periodically try to
  // finish with an active-set iteration from the current point: on a support
  // with fixed signs the objective is a quadratic, so solve it, step back to
  // the first sign change when one occurs, add the worst violator otherwise,
  // and shrink dependent supports along null directions (same fit, l1 norm
  // not larger). Nothing moves unless every optimality condition holds.
  const auto polish = [&]() {
    std::vector<Eigen::Index> support;
    std::vector<double> sign, b;
    for (Eigen::Index j = 0; j < features; ++j) {
      if (beta(j) != 0) {
        support.push_back(j);
        sign.push_back(beta(j) > 0 ? 1.0 : -1.0);
        b.push_back(beta(j));
      }
    }
    const auto drop = [&](std::size_t c) {
      support.erase(support.begin() + static_cast<std::ptrdiff_t>(c));
      sign.erase(sign.begin() + static_cast<std::ptrdiff_t>(c));
      b.erase(b.begin() + static_cast<std::ptrdiff_t>(c));
    };
    const auto columns = [&] {
      Eigen::MatrixXd xs(x.rows(), static_cast<Eigen::Index>(support.size()));
      for (std::size_t c = 0; c < support.size(); ++c) xs.col(static_cast<Eigen::Index>(c)) = x.col(support[c]);
      return xs;
    };
    for (Eigen::Index round = 0; round < 4 * features + 8; ++round) {
      // Make the support columns independent.
      while (!support.empty()) {
        const Eigen::MatrixXd xs = columns();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const auto k = static_cast<Eigen::Index>(support.size());
        if (sv.size() == k && sv(k - 1) > 1e-10 * sv(0)) break;
        Eigen::VectorXd v = svd.matrixV().col(k - 1);
        double slope = 0;
        for (Eigen::Index c = 0; c < k; ++c) slope += sign[static_cast<std::size_t>(c)] * v(c);
        if (slope > 0) v = -v;
        double step = std::numeric_limits<double>::infinity();
        std::size_t hit = support.size();
        for (int attempt = 0; attempt < 2 && hit == support.size(); ++attempt) {
          for (std::size_t c = 0; c < support.size(); ++c) {
            const double vc = v(static_cast<Eigen::Index>(c));
            if (sign[c] * vc < 0 && -b[c] / vc < step) {
              step = -b[c] / vc;
              hit = c;
            }
          }
          if (hit == support.size()) v = -v;  // l1 norm flat along v
        }
        if (hit == support.size()) return;
        for (std::size_t c = 0; c < support.size(); ++c) b[c] += step * v(static_cast<Eigen::Index>(c));
        drop(hit);
      }

      Eigen::VectorXd solved(static_cast<Eigen::Index>(support.size()));
      if (!support.empty()) {
        const Eigen::MatrixXd xs = columns();
        const Eigen::VectorXd sg = Eigen::Map<const Eigen::VectorXd>(sign.data(), static_cast<Eigen::Index>(sign.size()));
        const Eigen::MatrixXd gram = xs.transpose() * xs / rows;
        const Eigen::VectorXd rhs = xs.transpose() * y / rows - lambda * sg;
        solved = gram.colPivHouseholderQr().solve(rhs);
        if (!solved.allFinite() || (gram * solved - rhs).norm() > 1e-10 * (1 + rhs.norm())) return;
      }

      // Step toward the solution, stopping where a coordinate reaches zero.
      double t = 1;
      std::size_t hit = support.size();
      for (std::size_t c = 0; c < support.size(); ++c) {
        const double sc = solved(static_cast<Eigen::Index>(c));
        if (sign[c] * sc <= 0) {
          const double tc = b[c] / (b[c] - sc);
          if (tc < t) {
            t = tc;
            hit = c;
          }
        }
      }
      for (std::size_t c = 0; c < support.size(); ++c) b[c] += t * (solved(static_cast<Eigen::Index>(c)) - b[c]);
      if (hit < support.size()) {
        if (t <= 0) return;  // no progress possible from here
        drop(hit);
        continue;
      }

      Eigen::VectorXd candidate = Eigen::VectorXd::Zero(features);
      for (std::size_t c = 0; c < support.size(); ++c) candidate(support[c]) = b[c];
      const Eigen::VectorXd r = y - x * candidate;
      Eigen::Index worst = -1;
      double worst_excess = 0;
      for (Eigen::Index j = 0; j < features; ++j) {
        if (candidate(j) != 0 || col_sq(j) == 0) continue;
        const double excess = std::abs(x.col(j).dot(r) / rows) - lambda * (1 + 1e-9);
        if (excess > worst_excess) {
          worst_excess = excess;
          worst = j;
        }
      }
      if (worst < 0) {
        beta = candidate;
        residual = r;
        return;
      }
      support.push_back(worst);
      sign.push_back(x.col(worst).dot(r) > 0 ? 1.0 : -1.0);
      b.push_back(0.0);
    }
  };

  RegressionResult out;
  out.method = RegressionResult::Method::kLasso;
  out.lambda = lambda;
  std::size_t sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0;
    for (Eigen::Index j = 0; j < features; ++j) {
      if (col_sq(j) == 0) continue;
      const double rho = x.col(j).dot(residual) / rows + col_sq(j) * beta(j);
      const double shrunk = std::abs(rho) > lambda ? std::copysign(std::abs(rho) - lambda, rho) : 0.0;
      const double updated = shrunk / col_sq(j);
      const double delta = updated - beta(j);
      if (delta != 0) {
        residual -= delta * x.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change <= kTolerance) break;
    if ((sweep + 1) % 50 == 0) polish();
  }
  if (sweep == kMaxSweeps) throw NumericalError("lasso did not converge within 1e5 sweeps");
  out.iterations = sweep + 1;
  out.importance.assign(beta.data(), beta.data() + features);
  return out;
}

std::vector<double> lasso_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(10.0, -3.0 + k / 4.0));
  return grid;
}

std::vector<RegressionResult> lasso_path(const FeatureMatrix& m, const std::vector<double>& target,
                                         const std::vector<double>& lambdas) {
  std::vector<std::size_t> order(lambdas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });
  std::vector<RegressionResult> out(lambdas.size());
  const std::vector<double>* warm = nullptr;
  for (auto k : order) {
    out[k] = lasso(m, target, lambdas[k], warm);
    warm = &out[k].importance;
  }
  return out;
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (nodes.empty()) throw ValidationError("tree", "empty tree");
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    id = row(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(id)].value;
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::function<std::size_t(int)> walk = [&](int id) -> std::size_t {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    if (node.feature < 0) return 0;
    return 1 + std::max(walk(node.left), walk(node.right));
  };
  return walk(0);
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  std::size_t max_depth;
  double min_gain;
  RegressionTree tree;
  std::vector<double> importance;

  int build(std::vector<Eigen::Index> rows, std::size_t depth) {
    double mean = 0;
    for (auto r : rows) mean += y(r);
    mean /= static_cast<double>(rows.size());
    double sse = 0;
    for (auto r : rows) sse += (y(r) - mean) * (y(r) - mean);

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0, -1, -1, mean, rows.size()});
    if (depth >= max_depth || rows.size() < 2 || sse <= min_gain) return id;

    int best_feature = -1;
    double best_threshold = 0, best_gain = min_gain;
    std::vector<Eigen::Index> order = rows;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
      // Running sums of centered targets keep the SSE arithmetic well conditioned.
      double left_sum = 0, left_sq = 0;
      double total_sum = 0, total_sq = 0;
      for (auto r : order) {
        const double c = y(r) - mean;
        total_sum += c;
        total_sq += c * c;
      }
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const double c = y(order[k]) - mean;
        left_sum += c;
        left_sq += c * c;
        const double lo = x(order[k], f), hi = x(order[k + 1], f);
        if (lo == hi) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(order.size() - k - 1);
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double child_sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        const double gain = sse - child_sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = lo + (hi - lo) / 2;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
    importance[static_cast<std::size_t>(best_feature)] += best_gain;
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

RegressionResult tree_regression(const FeatureMatrix& m, const std::vector<double>& target,
                                 std::size_t max_depth) {
  check_target(m, target);
  if (m.values.rows() < 2) throw ValidationError("values", "tree regression needs at least 2 rows");
  const Eigen::VectorXd y = to_vector(target);
  const double root_sse = (y.array() - y.mean()).matrix().squaredNorm();

  TreeBuilder builder{m.values, y, max_depth, 1e-12 * root_sse, {},
                      std::vector<double>(static_cast<std::size_t>(m.values.cols()), 0.0)};
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(m.values.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  builder.build(std::move(rows), 0);

  RegressionResult out;
  out.method = RegressionResult::Method::kTree;
  out.max_depth = max_depth;
  const double total = std::accumulate(builder.importance.begin(), builder.importance.end(), 0.0);
  out.importance = builder.importance;
  if (total > 0) {
    for (auto& v : out.importance) v /= total;
  }
  out.tree = std::move(builder.tree);
  return out;
}

}  // namespace mgm
