#pragma once

// Non-negative kernel regression (NNK) neighborhoods over a view-set.
//
// For a query q with kNN candidate set S, the neighborhood weights solve
//
//   min_{theta >= 0}  1/2 theta^T (K_SS + ridge I) theta - theta^T k_Sq
//
// with the cosine kernel. Candidates that end with zero weight are
// geometrically redundant and are dropped; the survivors are the vertices of
// the polytope approximating q.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgm/embedding_store.hpp"
#include "mgm/error.hpp"

namespace mgm {

struct KernelConfig {
  /// Map negative cosines to 0 so the kernel range is [0, 1].
  bool clamp_negative = true;
  double ridge = 1e-10;
  /// Neighbors are kept when weight > weight_threshold * max weight.
  double weight_threshold = 1e-6;
  /// Candidate count; 0 selects min(size - 1, 50). Always capped at size - 1.
  std::size_t k_init = 0;
  /// Stationarity tolerance of the active-set solve.
  double kkt_tolerance = 1e-8;

  void validate() const;
  std::size_t effective_k(std::size_t view_set_size) const;
};

struct Neighborhood {
  std::size_t query = 0;
  std::vector<std::size_t> neighbors;
  std::vector<double> weights;
  /// Candidates used to initialize the solve, in kNN rank order.
  std::vector<std::size_t> candidates;
  /// Kernel values query-to-candidate, aligned with `candidates`.
  std::vector<double> kernel_row;
  /// Full solution over `candidates`, zeros included.
  std::vector<double> solution;
  /// True when every candidate has zero kernel value to the query; the top
  /// candidate is then kept with weight 0 so the neighborhood stays non-empty.
  bool isolated = false;
};

struct NNKGraph {
  std::vector<Neighborhood> neighborhoods;
  KernelConfig config;
};

/// Thrown when the active-set solve does not reach stationarity.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

double cosine_kernel(std::span<const double> a, std::span<const double> b,
                     const KernelConfig& cfg = {});

/// Kernel Gram matrix over all members of the view-set.
Eigen::MatrixXd kernel_matrix(const ViewSet& views, const KernelConfig& cfg = {});

/// Indices of the k largest kernel values to `query` (excluding it), ties by lower index.
std::vector<std::size_t> knn_candidates(std::size_t query, const Eigen::MatrixXd& gram,
                                        std::size_t k);
std::vector<std::size_t> knn_candidates(std::size_t query, const ViewSet& views,
                                        const KernelConfig& cfg = {});

/// Active-set solve of the non-negative quadratic program above.
/// `hessian` is K_SS + ridge I, `linear` is k_Sq. Returns the full solution.
Eigen::VectorXd nonnegative_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                               double kkt_tolerance = 1e-8);

/// Largest violation of the KKT conditions at `theta`.
double kkt_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                    const Eigen::VectorXd& theta);

Neighborhood nnk_solve(std::size_t query, std::span<const std::size_t> candidates,
                       const Eigen::MatrixXd& gram, const KernelConfig& cfg = {});
Neighborhood nnk_solve(std::size_t query, std::span<const std::size_t> candidates,
                       const ViewSet& views, const KernelConfig& cfg = {});

/// NNK neighborhood of every node. Solver failures are rethrown with the node index.
/// Output does not depend on `jobs`.
NNKGraph build_graph(const ViewSet& views, const KernelConfig& cfg = {}, std::size_t jobs = 1);

}  // namespace mgm
