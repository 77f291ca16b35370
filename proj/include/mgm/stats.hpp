#pragma once

// Model-level analyses over feature matrices (models x features): z-scoring,
// sparse PCA, complete-linkage clustering, Pearson correlation, LASSO and CART
// feature importance. Matrices here are small (tens of rows and columns), so
// everything is single-threaded and deterministic.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgm/error.hpp"

namespace mgm {

struct FeatureMatrix {
  std::vector<std::string> model_ids;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd values;  // rows = models, cols = features
  bool standardized = false;
  /// Set by standardize() for columns that had zero variance.
  std::vector<bool> constant_columns;

  void validate() const;
};

/// Column-wise z-score with population std. Constant columns become zero and
/// are flagged. Requires at least two rows.
FeatureMatrix standardize(const FeatureMatrix& m);

struct SparsePcaResult {
  Eigen::MatrixXd loadings;     // features x components, unit columns
  Eigen::MatrixXd projections;  // models x components
  /// Share of total variance captured by each component's projection.
  Eigen::VectorXd explained_variance_ratio;
  std::vector<int> iterations;
};

/// Penalized power iteration with soft-thresholding on the loadings and
/// projection deflation between components. With l1_penalty = 0 this is
/// ordinary PCA. Each component is sign-fixed so its largest-magnitude
/// loading is positive.
SparsePcaResult sparse_pca(const FeatureMatrix& m, std::size_t n_components = 2,
                           double l1_penalty = 0.0);

/// Pairwise Euclidean distances between rows.
Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& rows);

struct Merge {
  std::size_t a = 0;  // a < b; ids >= M refer to the cluster formed at step id - M
  std::size_t b = 0;
  double height = 0;
  std::size_t size = 0;

  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;

  /// Leaf order for drawing (left-to-right traversal of the final tree).
  std::vector<std::size_t> leaf_order() const;
};

/// Agglomerative clustering with farthest-point (complete) linkage. Ties go to
/// the pair with the lowest (a, b) cluster ids.
Dendrogram complete_linkage(const Eigen::MatrixXd& dist);

struct CorrelationResult {
  std::string feature;
  std::string task;
  double pearson_r = 0;
  double p_value = 1;
  std::size_t count = 0;
};

/// Pearson r and two-sided p-value from the t distribution with n - 2 dof.
CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided p-value of a Pearson r over n samples.
double pearson_p_value(double r, std::size_t n);

struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
    std::size_t samples = 0;
  };
  std::vector<Node> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  std::size_t depth() const;
};

struct RegressionResult {
  enum class Method { kLasso, kTree };
  Method method = Method::kLasso;
  /// LASSO coefficients or tree importances, one per feature.
  std::vector<double> importance;
  double lambda = 0;
  std::size_t max_depth = 0;
  std::size_t iterations = 0;
  RegressionTree tree;  // populated for kTree
};

/// 1/2 ||y - X b||^2 / M + lambda ||b||_1.
double lasso_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double lambda);

/// Cyclic coordinate descent on lasso_objective until the largest coefficient
/// change in a sweep is <= 1e-9. `warm_start`, when given, is the initial
/// coefficient vector.
RegressionResult lasso(const FeatureMatrix& m, const std::vector<double>& target, double lambda,
                       const std::vector<double>* warm_start = nullptr);

/// Default regularization grid: 10^-3 ... 10^0, four points per decade.
std::vector<double> lasso_grid();
/// Solves from the largest lambda down, warm-starting each fit from the
/// previous one; results come back in the order of `lambdas`.
std::vector<RegressionResult> lasso_path(const FeatureMatrix& m, const std::vector<double>& target,
                                         const std::vector<double>& lambdas);

/// CART regression tree with variance-reduction splits. Importance is the
/// total SSE reduction per feature, normalized to sum to one.
RegressionResult tree_regression(const FeatureMatrix& m, const std::vector<double>& target,
                                 std::size_t max_depth = 5);

}  // namespace mgm
