#include "mgm/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mgm/parallel.hpp"
#include "mgm/plot.hpp"

namespace mgm {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

fs::path under_out(const RunConfig& cfg, const fs::path& p) { return resolve(p, cfg.out); }

std::vector<InputSpec> effective_inputs(const RunConfig& cfg) {
  std::vector<InputSpec> out;
  if (!cfg.inputs.empty()) {
    out = cfg.inputs;
  } else {
    for (const auto& s : cfg.synth) out.push_back({s.params.model_id, s.params.policy_id, s.path});
  }
  for (auto& in : out) in.path = under_out(cfg, in.path);
  if (cfg.policy) {
    std::erase_if(out, [&](const InputSpec& in) { return in.policy_id != *cfg.policy; });
  }
  return out;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

std::string safe_name(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

double parse_number(const std::string& s, const fs::path& path) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError(path.string() + ": not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

ojson kernel_json(const KernelConfig& k) {
  ojson j;
  j["kind"] = "cosine";
  j["clamp_negative"] = k.clamp_negative;
  j["ridge"] = k.ridge;
  j["weight_threshold"] = k.weight_threshold;
  j["k_init"] = k.k_init;
  return j;
}

}  // namespace

void RunConfig::validate_inputs() const {
  if (jobs < 1) throw ValidationError("jobs", "must be >= 1");
  kernel.validate();
  for (const auto& in : effective_inputs(*this)) {
    if (!fs::exists(in.path)) throw InputError("input file not found: " + in.path.string());
  }
}

RunConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    cfg.out = resolve(j.value("out", std::string("mgm_out")), base_dir);
    cfg.jobs = j.value("jobs", default_jobs());
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.normalization = parse_normalization(j.value("normalization", std::string("paper")));
    if (j.contains("policy")) cfg.policy = j.at("policy").get<std::string>();
    cfg.cross = j.value("cross", true);
    cfg.metrics_from_graphs = j.value("metrics_from_graphs", false);
    cfg.per_sample = j.value("per_sample", false);

    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      if (k.value("kind", std::string("cosine")) != "cosine") {
        throw ValidationError("kernel.kind", "only the cosine kernel is supported");
      }
      cfg.kernel.clamp_negative = k.value("clamp_negative", cfg.kernel.clamp_negative);
      cfg.kernel.ridge = k.value("ridge", cfg.kernel.ridge);
      cfg.kernel.weight_threshold = k.value("weight_threshold", cfg.kernel.weight_threshold);
      cfg.kernel.k_init = k.value("k_init", cfg.kernel.k_init);
    }

    for (const auto& s : j.value("synth", nlohmann::json::array())) {
      SynthParams p;
      p.model_id = s.at("model_id").get<std::string>();
      p.subspace_dim = s.value("subspace_dim", p.subspace_dim);
      p.kind = parse_synth_kind(s.at("kind").get<std::string>(), &p.subspace_dim);
      p.n_items = s.value("n_items", p.n_items);
      p.t_views = s.value("t_views", p.t_views);
      p.dim = s.value("dim", p.dim);
      p.n_classes = s.value("n_classes", p.n_classes);
      p.strength = s.value("strength", p.strength);
      p.noise = s.value("noise", p.noise);
      p.created = s.value("created", p.created);
      const auto entry_seed = s.value("seed", std::uint64_t{0});
      const auto dir = s.value("dir", std::string("embeddings"));
      std::vector<std::string> policies = {policy::kAugs};
      if (s.contains("policies")) policies = s.at("policies").get<std::vector<std::string>>();
      for (const auto& pol : policies) {
        SynthSpec spec;
        spec.params = p;
        spec.params.policy_id = pol;
        spec.params.seed = entry_seed;
        spec.path = fs::path(dir) / (safe_name(p.model_id) + "_" + safe_name(pol) + ".mgm");
        cfg.synth.push_back(std::move(spec));
      }
    }

    for (const auto& in : j.value("inputs", nlohmann::json::array())) {
      cfg.inputs.push_back({in.at("model_id").get<std::string>(), in.at("policy_id").get<std::string>(),
                            resolve(in.at("path").get<std::string>(), base_dir)});
    }

    if (j.contains("analysis")) {
      const auto& a = j.at("analysis");
      if (a.contains("features")) cfg.analysis.features = resolve(a.at("features").get<std::string>(), base_dir);
      if (a.contains("accuracy")) cfg.analysis.accuracy = resolve(a.at("accuracy").get<std::string>(), base_dir);
      cfg.analysis.pca_components = a.value("pca_components", cfg.analysis.pca_components);
      cfg.analysis.pca_penalty = a.value("pca_penalty", cfg.analysis.pca_penalty);
      if (a.contains("lasso_lambdas")) {
        cfg.analysis.lasso_lambdas = a.at("lasso_lambdas").get<std::vector<double>>();
      }
      cfg.analysis.tree_depth = a.value("tree_depth", cfg.analysis.tree_depth);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

ojson graph_to_json(const NNKGraph& graph, const ViewSet& views) {
  ojson nodes = ojson::array();
  for (std::size_t t = 0; t < graph.neighborhoods.size(); ++t) {
    const auto& nb = graph.neighborhoods[t];
    ojson node;
    node["node"] = t;
    node["item"] = views.sources.at(t).first;
    node["view"] = views.sources.at(t).second;
    node["neighbors"] = nb.neighbors;
    node["weights"] = nb.weights;
    node["isolated"] = nb.isolated;
    nodes.push_back(std::move(node));
  }
  ojson j;
  j["kernel"] = kernel_json(graph.config);
  j["nodes"] = std::move(nodes);
  return j;
}

NNKGraph graph_from_json(const nlohmann::json& j, const ViewSet& views) {
  NNKGraph g;
  try {
    const auto& nodes = j.at("nodes");
    if (nodes.size() != views.size()) throw InputError("graph node count differs from view-set size");
    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      g.config.clamp_negative = k.value("clamp_negative", g.config.clamp_negative);
      g.config.ridge = k.value("ridge", g.config.ridge);
      g.config.weight_threshold = k.value("weight_threshold", g.config.weight_threshold);
      g.config.k_init = k.value("k_init", g.config.k_init);
    }
    for (std::size_t t = 0; t < nodes.size(); ++t) {
      const auto& n = nodes[t];
      if (n.at("item").get<std::size_t>() != views.sources[t].first ||
          n.at("view").get<std::size_t>() != views.sources[t].second) {
        throw InputError("graph node " + std::to_string(t) + " refers to a different source vector");
      }
      Neighborhood nb;
      nb.query = t;
      nb.neighbors = n.at("neighbors").get<std::vector<std::size_t>>();
      nb.weights = n.at("weights").get<std::vector<double>>();
      nb.isolated = n.value("isolated", false);
      if (nb.neighbors.empty() || nb.neighbors.size() != nb.weights.size()) {
        throw InputError("graph node " + std::to_string(t) + " has malformed neighbors");
      }
      for (auto u : nb.neighbors) {
        if (u >= views.size() || u == t) {
          throw InputError("graph node " + std::to_string(t) + " has an invalid neighbor index");
        }
      }
      g.neighborhoods.push_back(std::move(nb));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("graph json: ") + e.what());
  }
  return g;
}

fs::path graph_path(const RunConfig& cfg, const InputSpec& in, std::size_t view_set) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06zu.json", view_set);
  return cfg.out / "graphs" / safe_name(in.model_id) / safe_name(in.policy_id) / name;
}

std::vector<fs::path> cmd_synth(const RunConfig& cfg) {
  if (cfg.synth.empty()) throw InputError("config has no synth entries");
  std::vector<fs::path> written;
  for (const auto& spec : cfg.synth) {
    SynthParams p = spec.params;
    // Mix the run seed into each entry so --seed changes every fixture.
    p.seed = spec.params.seed * 0x9e3779b97f4a7c15ULL + cfg.seed;
    const fs::path path = under_out(cfg, spec.path);
    ensure_parent(path);
    write_embeddings(synthesize(p), path);
    spdlog::info("synth: wrote {} ({} / {}, {})", path.string(), p.model_id, p.policy_id, to_string(p.kind));
    written.push_back(path);
  }
  return written;
}

namespace {

EmbeddingSet load_input(const InputSpec& in) {
  auto set = read_embeddings(in.path);
  if (set.manifest.model_id != in.model_id || set.manifest.policy_id != in.policy_id) {
    spdlog::warn("{}: manifest says {} / {}, config says {} / {}; using the config ids", in.path.string(),
                 set.manifest.model_id, set.manifest.policy_id, in.model_id, in.policy_id);
  }
  // Sem grouping follows the configured policy id.
  set.manifest.policy_id = in.policy_id;
  return set;
}

}  // namespace

std::size_t cmd_graph(const RunConfig& cfg) {
  cfg.validate_inputs();
  std::size_t files = 0;
  for (const auto& in : effective_inputs(cfg)) {
    const auto set = load_input(in);
    const auto sets = view_sets(set);
    spdlog::info("graph: {} / {}: {} view-sets", in.model_id, in.policy_id, sets.size());
    parallel_for(sets.size(), cfg.jobs, [&](std::size_t k) {
      NNKGraph g;
      try {
        g = build_graph(sets[k], cfg.kernel);
      } catch (const SolverError& e) {
        throw SolverError(in.path.string() + " view-set " + std::to_string(k) + ": " + e.what(), e.residual());
      }
      ojson j;
      j["model_id"] = in.model_id;
      j["policy_id"] = in.policy_id;
      j["view_set"] = k;
      const auto body = graph_to_json(g, sets[k]);
      for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
      write_text(graph_path(cfg, in, k), j.dump() + "\n");
    });
    files += sets.size();
  }
  return files;
}

namespace {

struct PolicyRun {
  InputSpec input;
  std::size_t n_items = 0;
  std::size_t t_views = 0;
  std::size_t dim = 0;
  std::vector<ViewSet> sets;
  std::vector<NNKGraph> graphs;
  std::vector<double> diameters;
  std::vector<double> affinities;
  std::vector<double> neighbor_counts;
  std::size_t skipped_edges = 0;
  std::size_t isolated_nodes = 0;
};

PolicyRun run_policy(const RunConfig& cfg, const InputSpec& in) {
  const auto set = load_input(in);
  PolicyRun run;
  run.input = in;
  run.n_items = set.n_items;
  run.t_views = set.t_views;
  run.dim = set.dim;
  run.sets = view_sets(set);
  run.graphs.resize(run.sets.size());
  std::vector<GraphMetrics> metrics(run.sets.size());
  parallel_for(run.sets.size(), cfg.jobs, [&](std::size_t k) {
    if (cfg.metrics_from_graphs) {
      const auto path = graph_path(cfg, in, k);
      std::ifstream f(path);
      if (!f) throw InputError("graph file not found: " + path.string());
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
      }
      run.graphs[k] = graph_from_json(j, run.sets[k]);
    } else {
      try {
        run.graphs[k] = build_graph(run.sets[k], cfg.kernel);
      } catch (const SolverError& e) {
        throw SolverError(in.path.string() + " view-set " + std::to_string(k) + ": " + e.what(), e.residual());
      }
    }
    metrics[k] = graph_metrics(run.graphs[k], run.sets[k], cfg.normalization);
  });
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    for (const auto& node : metrics[k].nodes) {
      run.diameters.push_back(node.diameter);
      run.neighbor_counts.push_back(static_cast<double>(node.intrinsic_dim));
    }
    for (const auto& e : metrics[k].edges) run.affinities.push_back(e.affinity);
    run.skipped_edges += metrics[k].skipped_edges;
    for (const auto& nb : run.graphs[k].neighborhoods) run.isolated_nodes += nb.isolated ? 1 : 0;
  }
  return run;
}

std::vector<double> cross_values(const RunConfig& cfg, const PolicyRun& sem, const PolicyRun& aug) {
  if (sem.n_items != aug.n_items) {
    throw InputError("model " + sem.input.model_id + ": Sem and Augs files hold different item counts (" +
                     std::to_string(sem.n_items) + " vs " + std::to_string(aug.n_items) + ")");
  }
  std::vector<std::size_t> sem_set_of(sem.n_items);
  for (std::size_t k = 0; k < sem.sets.size(); ++k) {
    for (const auto& src : sem.sets[k].sources) sem_set_of[src.first] = k;
  }
  std::vector<double> values(aug.n_items);
  parallel_for(aug.n_items, cfg.jobs, [&](std::size_t item) {
    const std::size_t sk = sem_set_of[item];
    // Non-Sem view-sets are one per item, in item order.
    values[item] = cross_affinity(aug.graphs[item], aug.sets[item], sem.graphs[sk], sem.sets[sk], item,
                                  cfg.normalization);
  });
  return values;
}

ojson distribution_json(const MetricDistribution& d, bool per_sample) {
  ojson j;
  j["policy"] = d.policy_label();
  j["metric"] = d.metric;
  j["mean"] = d.mean;
  j["spread"] = d.spread;
  j["count"] = d.values.size();
  if (per_sample) j["values"] = d.values;
  return j;
}

}  // namespace

std::vector<ModelMetrics> cmd_metrics(const RunConfig& cfg) {
  cfg.validate_inputs();
  const auto inputs = effective_inputs(cfg);
  if (inputs.empty()) throw InputError("no inputs to compute metrics for");

  std::vector<std::string> model_order;
  std::map<std::string, std::vector<PolicyRun>> runs;
  for (const auto& in : inputs) {
    if (!runs.contains(in.model_id)) model_order.push_back(in.model_id);
    spdlog::info("metrics: {} / {}", in.model_id, in.policy_id);
    runs[in.model_id].push_back(run_policy(cfg, in));
  }

  std::vector<ModelMetrics> out;
  ojson models = ojson::array();
  std::string csv = "model_id,policy,metric,mean,spread,count\n";
  for (const auto& model : model_order) {
    ModelMetrics mm;
    mm.model_id = model;
    const PolicyRun* sem = nullptr;
    const PolicyRun* aug = nullptr;
    ojson inputs_json = ojson::array();
    for (const auto& run : runs[model]) {
      const auto& p = run.input.policy_id;
      if (p == policy::kSem) sem = &run;
      if (p == policy::kAugs) aug = &run;
      mm.distributions.push_back(aggregate(run.diameters, metric::kEquivariance, {p}));
      if (!run.affinities.empty()) {
        mm.distributions.push_back(aggregate(run.affinities, metric::kAffinity, {p}));
      } else {
        spdlog::warn("{} / {}: no affinity edges (all subspaces degenerate)", model, p);
      }
      mm.distributions.push_back(aggregate(run.neighbor_counts, metric::kNeighbors, {p}));
      mm.skipped_edges += run.skipped_edges;
      mm.isolated_nodes += run.isolated_nodes;
      ojson ij;
      ij["policy"] = p;
      ij["path"] = run.input.path.filename().string();
      ij["n_items"] = run.n_items;
      ij["t_views"] = run.t_views;
      ij["dim"] = run.dim;
      ij["graphs"] = run.sets.size();
      std::size_t nodes = 0;
      for (const auto& s : run.sets) nodes = std::max(nodes, s.size());
      ij["max_nodes_per_graph"] = nodes;
      ij["skipped_edges"] = run.skipped_edges;
      ij["isolated_nodes"] = run.isolated_nodes;
      inputs_json.push_back(std::move(ij));
    }
    if (cfg.cross && !cfg.policy) {
      if (!sem || !aug) {
        throw InputError("model " + model + ": Sem-Augs cross affinity requested but policy " +
                         (sem ? std::string(policy::kAugs) : std::string(policy::kSem)) + " is missing");
      }
      mm.distributions.push_back(aggregate(cross_values(cfg, *sem, *aug), metric::kAffinity,
                                           {policy::kSem, policy::kAugs}));
    }
    try {
      mm.features = feature_vector(mm.distributions);
    } catch (const InputError& e) {
      spdlog::info("metrics: {}: no feature vector ({})", model, e.what());
    }

    ojson mj;
    mj["model_id"] = model;
    mj["inputs"] = std::move(inputs_json);
    ojson dists = ojson::array();
    for (const auto& d : mm.distributions) {
      dists.push_back(distribution_json(d, cfg.per_sample));
      csv += model + "," + d.policy_label() + "," + d.metric + "," + format_double(d.mean) + "," +
             format_double(d.spread) + "," + std::to_string(d.values.size()) + "\n";
    }
    mj["distributions"] = std::move(dists);
    if (mm.features) {
      ojson f;
      for (const auto& nf : *mm.features) f[nf.name] = nf.value;
      mj["features"] = std::move(f);
    } else {
      mj["features"] = nullptr;
    }
    mj["diagnostics"] = {{"skipped_edges", mm.skipped_edges}, {"isolated_nodes", mm.isolated_nodes}};
    models.push_back(std::move(mj));
    out.push_back(std::move(mm));
  }

  ojson report;
  report["kernel"] = kernel_json(cfg.kernel);
  report["normalization"] = to_string(cfg.normalization);
  report["models"] = std::move(models);
  write_text(cfg.out / "metrics.json", report.dump(2) + "\n");
  write_text(cfg.out / "metrics.csv", csv);

  FeatureMatrix fm;
  fm.feature_names = feature_names();
  std::vector<const ModelMetrics*> complete;
  for (const auto& m : out) {
    if (m.features) complete.push_back(&m);
  }
  if (!complete.empty()) {
    fm.values.resize(static_cast<Eigen::Index>(complete.size()), static_cast<Eigen::Index>(fm.feature_names.size()));
    for (std::size_t r = 0; r < complete.size(); ++r) {
      fm.model_ids.push_back(complete[r]->model_id);
      for (std::size_t c = 0; c < fm.feature_names.size(); ++c) {
        fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*complete[r]->features)[c].value;
      }
    }
    write_feature_csv(fm, cfg.out / "features.csv");
  }
  return out;
}

FeatureMatrix read_feature_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw InputError(path.string() + ": empty feature table");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "model_id") {
    throw InputError(path.string() + ": header must start with model_id");
  }
  FeatureMatrix m;
  m.feature_names.assign(header.begin() + 1, header.end());
  m.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(m.feature_names.size()));
  std::set<std::string> seen;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != header.size()) {
      throw InputError(path.string() + ": line " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    }
    if (!seen.insert(cells[0]).second) throw InputError(path.string() + ": duplicate model_id " + cells[0]);
    m.model_ids.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) = parse_number(cells[c], path);
    }
  }
  m.validate();
  return m;
}

void write_feature_csv(const FeatureMatrix& m, const fs::path& path) {
  m.validate();
  std::string text = "model_id";
  for (const auto& f : m.feature_names) text += "," + f;
  text += "\n";
  for (std::size_t r = 0; r < m.model_ids.size(); ++r) {
    text += m.model_ids[r];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      text += "," + format_double(m.values(static_cast<Eigen::Index>(r), c));
    }
    text += "\n";
  }
  write_text(path, text);
}

std::vector<std::string> AccuracyTable::model_ids() const {
  std::set<std::string> ids;
  for (const auto& [task, by_model] : values) {
    for (const auto& [model, acc] : by_model) ids.insert(model);
  }
  return {ids.begin(), ids.end()};
}

AccuracyTable read_accuracy_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw InputError(path.string() + ": empty accuracy table");
  const auto header = split_csv_line(lines[0]);
  if (header != std::vector<std::string>{"model_id", "task", "accuracy"}) {
    throw InputError(path.string() + ": header must be model_id,task,accuracy");
  }
  AccuracyTable t;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != 3) throw InputError(path.string() + ": line " + std::to_string(r + 1) + " needs 3 cells");
    if (!t.values.contains(cells[1])) t.tasks.push_back(cells[1]);
    if (!t.values[cells[1]].emplace(cells[0], parse_number(cells[2], path)).second) {
      throw InputError(path.string() + ": duplicate entry for " + cells[0] + " / " + cells[1]);
    }
  }
  return t;
}

ojson cmd_analyze(const RunConfig& cfg) {
  const fs::path features_path =
      cfg.analysis.features.empty() ? cfg.out / "features.csv" : cfg.analysis.features;
  const FeatureMatrix raw = read_feature_csv(features_path);
  if (raw.model_ids.size() < 3) throw InputError("analysis needs at least 3 models in " + features_path.string());

  std::optional<AccuracyTable> acc;
  if (!cfg.analysis.accuracy.empty()) {
    acc = read_accuracy_csv(cfg.analysis.accuracy);
    const std::set<std::string> a(raw.model_ids.begin(), raw.model_ids.end());
    std::set<std::string> b;
    for (const auto& task : acc->tasks) {
      for (const auto& [model, v] : acc->values.at(task)) b.insert(model);
    }
    std::vector<std::string> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    // Every task must also cover every model.
    for (const auto& task : acc->tasks) {
      for (const auto& id : raw.model_ids) {
        if (!acc->values.at(task).contains(id) && b.contains(id)) diff.push_back(id + " (task " + task + ")");
      }
    }
    if (!diff.empty()) {
      std::string msg = "model ids differ between feature and accuracy tables:";
      for (const auto& d : diff) msg += " " + d;
      throw InputError(msg);
    }
  }

  const FeatureMatrix z = standardize(raw);
  const auto pca = sparse_pca(z, cfg.analysis.pca_components, cfg.analysis.pca_penalty);
  const auto dendro = complete_linkage(euclidean_distances(z.values));

  ojson report;
  report["models"] = raw.model_ids;
  report["features"] = raw.feature_names;
  std::vector<std::string> constant;
  for (std::size_t c = 0; c < z.constant_columns.size(); ++c) {
    if (z.constant_columns[c]) constant.push_back(raw.feature_names[c]);
  }
  report["constant_features"] = constant;

  ojson pj;
  pj["penalty"] = cfg.analysis.pca_penalty;
  pj["explained_variance_ratio"] = std::vector<double>(pca.explained_variance_ratio.data(),
                                                       pca.explained_variance_ratio.data() + pca.explained_variance_ratio.size());
  ojson loadings;
  std::string loadings_csv = "feature";
  for (Eigen::Index c = 0; c < pca.loadings.cols(); ++c) loadings_csv += ",pc" + std::to_string(c + 1);
  loadings_csv += "\n";
  for (std::size_t f = 0; f < raw.feature_names.size(); ++f) {
    std::vector<double> row(static_cast<std::size_t>(pca.loadings.cols()));
    loadings_csv += raw.feature_names[f];
    for (Eigen::Index c = 0; c < pca.loadings.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = pca.loadings(static_cast<Eigen::Index>(f), c);
      loadings_csv += "," + format_double(row[static_cast<std::size_t>(c)]);
    }
    loadings_csv += "\n";
    loadings[raw.feature_names[f]] = row;
  }
  pj["loadings"] = std::move(loadings);
  ojson projections;
  std::string scatter_csv = "model_id";
  for (Eigen::Index c = 0; c < pca.projections.cols(); ++c) scatter_csv += ",pc" + std::to_string(c + 1);
  scatter_csv += "\n";
  for (std::size_t m = 0; m < raw.model_ids.size(); ++m) {
    std::vector<double> row(static_cast<std::size_t>(pca.projections.cols()));
    scatter_csv += raw.model_ids[m];
    for (Eigen::Index c = 0; c < pca.projections.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = pca.projections(static_cast<Eigen::Index>(m), c);
      scatter_csv += "," + format_double(row[static_cast<std::size_t>(c)]);
    }
    scatter_csv += "\n";
    projections[raw.model_ids[m]] = row;
  }
  pj["projections"] = std::move(projections);
  report["pca"] = std::move(pj);

  ojson dj;
  dj["distance"] = "euclidean over standardized features";
  dj["leaves"] = raw.model_ids;
  ojson merges = ojson::array();
  std::string dendro_csv = "step,a,b,height,size\n";
  for (std::size_t s = 0; s < dendro.merges.size(); ++s) {
    const auto& m = dendro.merges[s];
    merges.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
    dendro_csv += std::to_string(s) + "," + std::to_string(m.a) + "," + std::to_string(m.b) + "," +
                  format_double(m.height) + "," + std::to_string(m.size) + "\n";
  }
  dj["merges"] = std::move(merges);
  dj["leaf_order"] = dendro.leaf_order();
  report["dendrogram"] = std::move(dj);

  write_text(cfg.out / "pca_loadings.csv", loadings_csv);
  write_text(cfg.out / "pca_scatter.csv", scatter_csv);
  write_text(cfg.out / "dendrogram.csv", dendro_csv);
  write_text(cfg.out / "pca_scatter.svg", scatter_svg(raw.model_ids, pca.projections));
  write_text(cfg.out / "dendrogram.svg", dendrogram_svg(raw.model_ids, dendro));

  if (acc) {
    ojson corr = ojson::array();
    ojson lasso_json = ojson::array();
    ojson tree_json = ojson::array();
    std::string corr_csv = "task,feature,pearson_r,p_value,count\n";
    std::string imp_csv = "task,method,parameter,feature,value\n";
    for (const auto& task : acc->tasks) {
      std::vector<double> y;
      for (const auto& id : raw.model_ids) y.push_back(acc->values.at(task).at(id));
      for (std::size_t f = 0; f < raw.feature_names.size(); ++f) {
        std::vector<double> x(raw.model_ids.size());
        for (std::size_t m = 0; m < x.size(); ++m) {
          x[m] = raw.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(f));
        }
        ojson cj;
        cj["task"] = task;
        cj["feature"] = raw.feature_names[f];
        try {
          const auto r = pearson(x, y);
          cj["pearson_r"] = r.pearson_r;
          cj["p_value"] = r.p_value;
          cj["count"] = r.count;
          corr_csv += task + "," + raw.feature_names[f] + "," + format_double(r.pearson_r) + "," +
                      format_double(r.p_value) + "," + std::to_string(r.count) + "\n";
        } catch (const NumericalError&) {
          cj["pearson_r"] = nullptr;
          cj["p_value"] = nullptr;
          cj["count"] = x.size();
          corr_csv += task + "," + raw.feature_names[f] + ",,," + std::to_string(x.size()) + "\n";
        }
        corr.push_back(std::move(cj));
      }

      double mean = 0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(y.size());
      std::vector<double> centered = y;
      for (double& v : centered) v -= mean;
      for (const auto& fit : lasso_path(z, centered, cfg.analysis.lasso_lambdas)) {
        ojson coef;
        for (std::size_t f = 0; f < raw.feature_names.size(); ++f) {
          coef[raw.feature_names[f]] = fit.importance[f];
          imp_csv += task + ",lasso," + format_double(fit.lambda) + "," + raw.feature_names[f] + "," +
                     format_double(fit.importance[f]) + "\n";
        }
        lasso_json.push_back({{"task", task}, {"lambda", fit.lambda}, {"coefficients", std::move(coef)}});
      }

      const auto tree = tree_regression(z, y, cfg.analysis.tree_depth);
      ojson imp;
      for (std::size_t f = 0; f < raw.feature_names.size(); ++f) {
        imp[raw.feature_names[f]] = tree.importance[f];
        imp_csv += task + ",tree," + std::to_string(tree.max_depth) + "," + raw.feature_names[f] + "," +
                   format_double(tree.importance[f]) + "\n";
      }
      tree_json.push_back({{"task", task}, {"max_depth", tree.max_depth}, {"importances", std::move(imp)}});
    }
    report["correlations"] = std::move(corr);
    report["lasso"] = std::move(lasso_json);
    report["tree"] = std::move(tree_json);
    write_text(cfg.out / "correlations.csv", corr_csv);
    write_text(cfg.out / "importances.csv", imp_csv);
  }

  write_text(cfg.out / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace mgm
