#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdlib>
#include <cstring>

#include <spdlog/spdlog.h>

#include "mgm/metrics.hpp"
#include "mgm/nnk.hpp"
#include "mgm/pipeline.hpp"
#include "mgm/synth.hpp"

namespace py = pybind11;
using namespace mgm;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray to_array(const EmbeddingSet& s) {
  FloatArray out({s.n_items, s.t_views, s.dim});
  std::memcpy(out.mutable_data(), s.data.data(), s.data.size() * sizeof(float));
  return out;
}

EmbeddingSet from_array(const FloatArray& a, const Manifest& m) {
  if (a.ndim() != 3) throw ValidationError("data", "expected an (N, T, D) array");
  EmbeddingSet s;
  s.n_items = static_cast<std::size_t>(a.shape(0));
  s.t_views = static_cast<std::size_t>(a.shape(1));
  s.dim = static_cast<std::size_t>(a.shape(2));
  s.data.assign(a.data(), a.data() + a.size());
  s.manifest = m;
  return s;
}

// Columns of `members` form one view-set.
ViewSet views_of(const Eigen::MatrixXd& members) {
  ViewSet v;
  v.members = members;
  for (Eigen::Index j = 0; j < members.cols(); ++j) v.sources.emplace_back(static_cast<std::size_t>(j), 0);
  return v;
}

KernelConfig kernel(bool clamp_negative, std::size_t k_init) {
  KernelConfig cfg;
  cfg.clamp_negative = clamp_negative;
  cfg.k_init = k_init;
  return cfg;
}

py::dict graph_dict(const NNKGraph& g, const ViewSet& views, Normalization norm) {
  py::list neighbors, weights;
  for (const auto& nb : g.neighborhoods) {
    neighbors.append(nb.neighbors);
    weights.append(nb.weights);
  }
  const auto m = graph_metrics(g, views, norm);
  std::vector<double> diameter;
  std::vector<std::size_t> id;
  for (const auto& n : m.nodes) {
    diameter.push_back(n.diameter);
    id.push_back(n.intrinsic_dim);
  }
  std::vector<double> affinity;
  for (const auto& e : m.edges) affinity.push_back(e.affinity);
  py::dict d;
  d["neighbors"] = neighbors;
  d["weights"] = weights;
  d["diameter"] = diameter;
  d["n_neighbors"] = id;
  d["affinity"] = affinity;
  return d;
}

RunConfig config_with(const std::filesystem::path& path, std::optional<std::filesystem::path> out) {
  auto cfg = load_config(path);
  if (out) cfg.out = *out;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_mgm, m) {
  m.doc() = "Manifold graph metrics over NNK neighborhoods";
  if (const char* level = std::getenv("MGM_LOG")) spdlog::set_level(spdlog::level::from_str(level));

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());

  py::enum_<Normalization>(m, "Normalization")
      .value("paper", Normalization::kPaper)
      .value("min", Normalization::kMin);

  py::class_<Manifest>(m, "Manifest")
      .def(py::init<>())
      .def_readwrite("model_id", &Manifest::model_id)
      .def_readwrite("policy_id", &Manifest::policy_id)
      .def_readwrite("labels", &Manifest::labels)
      .def_readwrite("created", &Manifest::created)
      .def_readonly("version", &Manifest::version);

  m.def(
      "read_embeddings",
      [](const std::filesystem::path& p) {
        const auto s = read_embeddings(p);
        return py::make_tuple(to_array(s), s.manifest);
      },
      py::arg("path"), "Returns (array of shape (N, T, D), Manifest).");
  m.def(
      "write_embeddings",
      [](const std::filesystem::path& p, const FloatArray& data, const Manifest& manifest) {
        write_embeddings(from_array(data, manifest), p);
      },
      py::arg("path"), py::arg("data"), py::arg("manifest"));

  m.def(
      "synthesize",
      [](const std::string& kind, const std::string& policy_id, std::uint64_t seed, std::size_t n_items,
         std::size_t t_views, std::size_t dim, double strength) {
        SynthParams p;
        p.kind = parse_synth_kind(kind, &p.subspace_dim);
        p.policy_id = policy_id;
        p.seed = seed;
        p.n_items = n_items;
        p.t_views = t_views;
        p.dim = dim;
        p.strength = strength;
        const auto s = synthesize(p);
        return py::make_tuple(to_array(s), s.manifest);
      },
      py::arg("kind"), py::arg("policy_id") = "Augs", py::arg("seed") = 0, py::arg("n_items") = 12,
      py::arg("t_views") = 10, py::arg("dim") = 16, py::arg("strength") = 1.0);

  m.def(
      "nnk_graph",
      [](const Eigen::MatrixXd& points, bool clamp_negative, std::size_t k_init, Normalization norm,
         std::size_t jobs) {
        const auto views = views_of(points.transpose());
        return graph_dict(build_graph(views, kernel(clamp_negative, k_init), jobs), views, norm);
      },
      py::arg("points"), py::arg("clamp_negative") = true, py::arg("k_init") = 0,
      py::arg("normalization") = Normalization::kPaper, py::arg("jobs") = 1,
      "NNK graph over the rows of `points` with per-node metrics.");

  m.def(
      "subspace_affinity",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Normalization norm) {
        return subspace_affinity(span_basis(a.transpose()), span_basis(b.transpose()), norm);
      },
      py::arg("a"), py::arg("b"), py::arg("normalization") = Normalization::kPaper,
      "Affinity between the spans of the rows of `a` and of `b`.");

  m.def("feature_names", &feature_names);

  m.def(
      "run_synth",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return cmd_synth(config_with(config, out));
      },
      py::arg("config"), py::arg("out") = py::none());
  m.def(
      "run_graph",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return cmd_graph(config_with(config, out));
      },
      py::arg("config"), py::arg("out") = py::none());
  m.def(
      "run_metrics",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        py::dict result;
        for (const auto& mm : cmd_metrics(config_with(config, out))) {
          py::dict dists;
          for (const auto& d : mm.distributions) {
            dists[py::str(d.policy_label() + "/" + d.metric)] = py::make_tuple(d.mean, d.spread);
          }
          result[py::str(mm.model_id)] = dists;
        }
        return result;
      },
      py::arg("config"), py::arg("out") = py::none(),
      "Returns {model_id: {'policy/metric': (mean, spread)}}.");
  m.def(
      "run_analyze",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return cmd_analyze(config_with(config, out)).dump();
      },
      py::arg("config"), py::arg("out") = py::none(), "Returns the report as JSON text.");
}
