#pragma once

// End-to-end workflow: synth -> graph -> metrics -> analyze. Commands exchange
// data only through files under the output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgm/embedding_store.hpp"
#include "mgm/metrics.hpp"
#include "mgm/nnk.hpp"
#include "mgm/stats.hpp"
#include "mgm/synth.hpp"

namespace mgm {

struct InputSpec {
  std::string model_id;
  std::string policy_id;
  std::filesystem::path path;
};

struct SynthSpec {
  SynthParams params;
  std::filesystem::path path;
};

struct AnalysisConfig {
  std::filesystem::path features;  // empty: <out>/features.csv
  std::filesystem::path accuracy;
  std::size_t pca_components = 2;
  double pca_penalty = 1.5;
  std::vector<double> lasso_lambdas = lasso_grid();
  std::size_t tree_depth = 5;
};

struct RunConfig {
  std::vector<InputSpec> inputs;
  std::vector<SynthSpec> synth;
  KernelConfig kernel;
  Normalization normalization = Normalization::kPaper;
  std::filesystem::path out = "mgm_out";
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  /// Restrict graph/metrics to one policy id.
  std::optional<std::string> policy;
  /// Compute the Sem-Augs cross affinity; requires both policies per model.
  bool cross = true;
  /// Load graphs written by cmd_graph instead of rebuilding them.
  bool metrics_from_graphs = false;
  /// Include per-sample values in metrics.json.
  bool per_sample = false;
  AnalysisConfig analysis;

  /// Checks parallelism and that every input path exists.
  void validate_inputs() const;
};

/// Parses a JSON config. Relative paths are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json graph_to_json(const NNKGraph& graph, const ViewSet& views);
NNKGraph graph_from_json(const nlohmann::json& j, const ViewSet& views);

std::filesystem::path graph_path(const RunConfig& cfg, const InputSpec& in, std::size_t view_set);

/// Writes one embedding file per synth entry. Returns the written paths.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& cfg);

/// Writes one graph JSON per view-set. Returns the number of graph files.
std::size_t cmd_graph(const RunConfig& cfg);

struct ModelMetrics {
  std::string model_id;
  std::vector<MetricDistribution> distributions;
  std::optional<std::vector<NamedFeature>> features;
  std::size_t skipped_edges = 0;
  std::size_t isolated_nodes = 0;
};

/// Computes distributions per (model, policy) and the feature vector per model.
/// Writes metrics.csv, metrics.json and features.csv under cfg.out.
std::vector<ModelMetrics> cmd_metrics(const RunConfig& cfg);

/// Model-level analyses. Writes report.json and plot-ready CSV/SVG files.
nlohmann::ordered_json cmd_analyze(const RunConfig& cfg);

// Table I/O.
FeatureMatrix read_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);

/// task -> model_id -> accuracy, tasks kept in first-appearance order.
struct AccuracyTable {
  std::vector<std::string> tasks;
  std::map<std::string, std::map<std::string, double>> values;
  std::vector<std::string> model_ids() const;
};
AccuracyTable read_accuracy_csv(const std::filesystem::path& path);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

}  // namespace mgm
