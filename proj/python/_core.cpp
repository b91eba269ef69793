// Python bindings. Arrays cross the boundary as numpy arrays with one sample
// per row; the C++ side stores samples as columns.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "protonet/cli.hpp"
#include "protonet/episodes.hpp"
#include "protonet/error.hpp"
#include "protonet/geometry.hpp"
#include "protonet/heads.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/io.hpp"
#include "protonet/synthetic.hpp"
#include "protonet/trainer.hpp"

namespace py = pybind11;
using namespace protonet;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

PoincarePoint ball(const Vector& v, double c) { return PoincarePoint(v, Curvature(c)); }

HeadConfig make_head(const std::string& metric, double tau, double c, double r, double gamma) {
  HeadConfig h;
  h.metric = parse_metric(metric);
  h.tau = tau;
  h.c = c;
  h.r = r;
  h.gamma = gamma;
  h.validate();
  return h;
}

py::dict interval(const Interval& i) {
  py::dict d;
  d["mean"] = i.mean;
  d["half_width"] = i.half_width;
  return d;
}

py::dict level_map(const std::map<int, Interval>& m) {
  py::dict d;
  for (const auto& [level, i] : m) d[py::int_(level)] = interval(i);
  return d;
}

py::dict split_dict(const DatasetSplit& s) {
  py::dict d;
  d["base"] = s.base;
  d["val"] = s.val;
  d["novel"] = s.novel;
  return d;
}

DatasetSplit split_from(const py::dict& d) {
  DatasetSplit s;
  auto list = [&](const char* key) {
    return d.contains(key) ? d[key].cast<std::vector<std::string>>() : std::vector<std::string>{};
  };
  s.base = list("base");
  s.val = list("val");
  s.novel = list("novel");
  return s;
}

py::dict model_dict(const ProjectionModel& m) {
  py::dict d;
  d["weight"] = m.weight;
  d["bias"] = m.bias;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prototype heads for few-shot classification over class hierarchies";

  // Kept alive by the module; a static py::object would be destroyed after
  // interpreter shutdown.
  static py::handle error_type = py::exception<Error>(m, "ProtonetError", PyExc_ValueError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = error_type(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("category") = std::string(to_string(e.category()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // geometry
  m.def("mobius_add", [](const Vector& x, const Vector& y, double c) {
    return mobius_add(ball(x, c), ball(y, c)).coords;
  }, py::arg("x"), py::arg("y"), py::arg("c"));
  m.def("distance", [](const Vector& x, const Vector& y, double c) {
    return poincare_distance(ball(x, c), ball(y, c));
  }, py::arg("x"), py::arg("y"), py::arg("c"));
  m.def("distance_gradient", [](const Vector& x, const Vector& y, double c) {
    return distance_gradient(ball(x, c), ball(y, c));
  }, py::arg("x"), py::arg("y"), py::arg("c"));
  m.def("conformal_factor", [](const Vector& x, double c) { return conformal_factor(ball(x, c)); },
        py::arg("x"), py::arg("c"));
  m.def("exp_map", [](const Vector& z, const Vector& v, double c) {
    return exp_map(ball(z, c), TangentVector{v}).coords;
  }, py::arg("z"), py::arg("v"), py::arg("c"));
  m.def("exp_map0", [](const Vector& v, double c) {
    return exp_map(PoincarePoint::origin(v.size(), Curvature(c)), TangentVector{v}).coords;
  }, py::arg("v"), py::arg("c"));
  m.def("poincare_to_klein", [](const Vector& x, double c) { return poincare_to_klein(ball(x, c)).coords; },
        py::arg("x"), py::arg("c"));
  m.def("klein_to_poincare", [](const Vector& k, double c) {
    return klein_to_poincare(KleinPoint(k, Curvature(c))).coords;
  }, py::arg("k"), py::arg("c"));
  m.def("einstein_midpoint", [](const RowMatrix& points, double c) {
    std::vector<KleinPoint> ks;
    for (Eigen::Index i = 0; i < points.rows(); ++i) ks.emplace_back(points.row(i).transpose(), Curvature(c));
    return einstein_midpoint(ks).coords;
  }, py::arg("points"), py::arg("c"), "Klein midpoint of the rows of `points`.");
  m.def("clip", &clip_features, py::arg("x"), py::arg("r"));

  // hierarchy
  py::class_<ClassHierarchy>(m, "ClassHierarchy")
      .def_static("from_edges", [](const std::vector<Edge>& edges) { return load_hierarchy(edges); },
                  py::arg("edges"), "Edges are (parent, child) pairs.")
      .def_static("parse", [](const std::string& text) { return parse_hierarchy(text); }, py::arg("text"))
      .def_static("load", [](const std::string& path) { return read_hierarchy_file(path); }, py::arg("path"))
      .def_property_readonly("height", &ClassHierarchy::height)
      .def_property_readonly("root", &ClassHierarchy::root)
      .def_property_readonly("leaves", &ClassHierarchy::leaves)
      .def("level_of", &ClassHierarchy::level_of)
      .def("ancestor_at_level", &ClassHierarchy::ancestor_at_level, py::arg("leaf"), py::arg("level"))
      .def("nodes_at_level", &ClassHierarchy::nodes_at_level)
      .def("edges", &ClassHierarchy::edges)
      .def("__contains__", &ClassHierarchy::contains)
      .def("__str__", &serialize_hierarchy);
  m.def("level_weights", [](double gamma, int height) { return level_weights(gamma, height).weights; },
        py::arg("gamma"), py::arg("height"));

  // data
  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def(py::init([](std::vector<std::string> ids, std::vector<std::string> labels, const RowMatrix& rows) {
             return EmbeddingSet(std::move(ids), std::move(labels), rows.transpose());
           }),
           py::arg("ids"), py::arg("labels"), py::arg("vectors"))
      .def_static("load", [](const std::string& path) { return load_embeddings(path); }, py::arg("path"))
      .def_static("parse", [](const std::string& text) { return parse_embeddings(text); }, py::arg("text"))
      .def_property_readonly("ids", &EmbeddingSet::ids)
      .def_property_readonly("labels", &EmbeddingSet::labels)
      .def_property_readonly("vectors", [](const EmbeddingSet& e) { return RowMatrix(e.vectors().transpose()); })
      .def_property_readonly("dim", &EmbeddingSet::dim)
      .def("classes", &EmbeddingSet::classes)
      .def("__len__", &EmbeddingSet::size)
      .def("to_csv", &format_embeddings);

  m.def("synthetic", [](int super_classes, int leaves_per_super, int samples_per_leaf, int dim, double super_spread,
                        double leaf_spread, double noise, int nuisance_dims, double nuisance_noise, int novel_classes,
                        int val_classes, std::uint64_t seed) {
    SyntheticSpec s{super_classes, leaves_per_super, samples_per_leaf, dim, super_spread, leaf_spread, noise,
                    nuisance_dims, nuisance_noise, novel_classes, val_classes, seed};
    auto out = make_synthetic(s);
    return py::make_tuple(std::move(out.data), std::move(out.hierarchy), split_dict(out.split));
  }, py::arg("super_classes") = 4, py::arg("leaves_per_super") = 3, py::arg("samples_per_leaf") = 40,
     py::arg("dim") = 32, py::arg("super_spread") = 3.0, py::arg("leaf_spread") = 1.0, py::arg("noise") = 0.3,
     py::arg("nuisance_dims") = 0, py::arg("nuisance_noise") = 0.0, py::arg("novel_classes") = 6,
     py::arg("val_classes") = 3, py::arg("seed") = 0,
     "Returns (embeddings, hierarchy, split dict).");

  // episodes and heads
  py::class_<Episode>(m, "Episode")
      .def_readonly("classes", &Episode::classes)
      .def_readonly("index", &Episode::index)
      .def_property_readonly("support", [](const Episode& e) { return RowMatrix(e.support.x.transpose()); })
      .def_property_readonly("support_labels", [](const Episode& e) { return e.support.labels; })
      .def_property_readonly("query", [](const Episode& e) { return RowMatrix(e.query.x.transpose()); })
      .def_property_readonly("query_labels", [](const Episode& e) { return e.query.labels; });

  m.def("sample_episode", [](const EmbeddingSet& data, const std::vector<std::string>& classes, int ways, int shots,
                             int queries, std::uint64_t seed, std::uint64_t index) {
    return sample_episode_at(data, classes, EpisodeShape{ways, shots, queries}, seed, index);
  }, py::arg("data"), py::arg("classes"), py::arg("ways") = 5, py::arg("shots") = 5, py::arg("queries") = 15,
     py::arg("seed") = 0, py::arg("index") = 0);

  m.def("class_probabilities", [](const Episode& ep, const ClassHierarchy& h, const std::string& metric, double tau,
                                  double c, double r, double gamma) {
    const HeadConfig head = make_head(metric, tau, c, r, gamma);
    const PrototypeSet protos = build_prototypes(ep.support, head, h);
    py::dict out;
    for (const auto& [level, lp] : protos.levels) {
      RowMatrix probs(ep.query.size(), static_cast<Eigen::Index>(lp.size()));
      for (Eigen::Index i = 0; i < ep.query.size(); ++i) {
        probs.row(i) = class_probabilities(ep.query.x.col(i), lp, head).transpose();
      }
      out[py::int_(level)] = py::make_tuple(lp.nodes, probs);
    }
    return out;
  }, py::arg("episode"), py::arg("hierarchy"), py::arg("metric") = "euclidean", py::arg("tau") = 1.0,
     py::arg("c") = 0.01, py::arg("r") = 1.0, py::arg("gamma") = 2.0,
     "Per level: (node names, queries x nodes probability matrix).");

  m.def("episode_loss", [](const Episode& ep, const ClassHierarchy& h, const std::string& metric, double tau,
                           double c, double r, double gamma) {
    const HeadConfig head = make_head(metric, tau, c, r, gamma);
    return episode_loss(ep, build_prototypes(ep.support, head, h), h, head);
  }, py::arg("episode"), py::arg("hierarchy"), py::arg("metric") = "euclidean", py::arg("tau") = 1.0,
     py::arg("c") = 0.01, py::arg("r") = 1.0, py::arg("gamma") = 2.0);

  m.def("evaluate", [](const EmbeddingSet& data, const std::vector<std::string>& classes, const ClassHierarchy& h,
                       const std::string& metric, double tau, double c, double r, double gamma, int ways, int shots,
                       int queries, int episodes, std::uint64_t seed, int threads) {
    const HeadConfig head = make_head(metric, tau, c, r, gamma);
    EvalOptions opts{EpisodeShape{ways, shots, queries}, episodes, seed, threads};
    EvalReport rep;
    {
      py::gil_scoped_release release;
      rep = run_evaluation(data, classes, h, head, opts);
    }
    py::dict d;
    d["overall"] = interval(rep.overall);
    d["level"] = level_map(rep.level);
    d["level_leaf_mapped"] = level_map(rep.level_leaf_mapped);
    d["hierarchical_precision"] = interval(rep.hierarchical_precision);
    d["queries_per_episode"] = rep.queries_per_episode;
    d["row"] = format_interval(rep.overall);
    return d;
  }, py::arg("data"), py::arg("classes"), py::arg("hierarchy"), py::arg("metric") = "euclidean", py::arg("tau") = 1.0,
     py::arg("c") = 0.01, py::arg("r") = 1.0, py::arg("gamma") = 2.0, py::arg("ways") = 5, py::arg("shots") = 5,
     py::arg("queries") = 15, py::arg("episodes") = 1000, py::arg("seed") = 0, py::arg("threads") = 1,
     "Accuracies are percentages with 95% confidence half-widths.");

  // training
  m.def("train", [](const EmbeddingSet& data, const py::dict& split, const ClassHierarchy& h, const std::string& metric,
                    int epochs, int episodes_per_epoch, int val_episodes, int out_dim, std::uint64_t seed,
                    std::optional<double> lr, int ways, int shots, int queries, int threads) {
    TrainConfig cfg = TrainConfig::defaults_for(parse_metric(metric));
    cfg.epochs = epochs;
    cfg.episodes_per_epoch = episodes_per_epoch;
    cfg.val_episodes = val_episodes;
    cfg.out_dim = out_dim;
    cfg.seed = seed;
    if (lr) cfg.sgd.lr = *lr;
    cfg.shape = EpisodeShape{ways, shots, queries};
    cfg.threads = threads;
    const DatasetSplit s = split_from(split);
    TrainResult res;
    {
      py::gil_scoped_release release;
      res = meta_train(data, s, h, cfg);
    }
    py::list curve;
    for (const auto& e : res.curve) {
      py::dict row;
      row["epoch"] = e.epoch;
      row["mean_loss"] = e.mean_loss;
      row["val_accuracy"] = e.val_accuracy;
      curve.append(row);
    }
    py::dict d;
    d["curve"] = curve;
    d["best_epoch"] = res.best_epoch;
    d["best_val_accuracy"] = res.best_val_accuracy;
    d["best"] = model_dict(res.best);
    d["last"] = model_dict(res.model);
    return d;
  }, py::arg("data"), py::arg("split"), py::arg("hierarchy"), py::arg("metric") = "euclidean", py::arg("epochs") = 5,
     py::arg("episodes_per_epoch") = 500, py::arg("val_episodes") = 500, py::arg("out_dim") = 0, py::arg("seed") = 0,
     py::arg("lr") = py::none(), py::arg("ways") = 5, py::arg("shots") = 5, py::arg("queries") = 15,
     py::arg("threads") = 1);

  m.def("project", [](const Matrix& weight, const Vector& bias, const RowMatrix& rows) {
    const ProjectionModel model{weight, bias};
    return RowMatrix(forward_project(model, Matrix(rows.transpose())).transpose());
  }, py::arg("weight"), py::arg("bias"), py::arg("rows"));

  m.def("gradcheck", [](const Episode& ep, const ClassHierarchy& h, const std::string& metric, int out_dim,
                        std::uint64_t seed, double step, std::optional<double> threshold, double tau, double c,
                        double r, double gamma) {
    const HeadConfig head = make_head(metric, tau, c, r, gamma);
    const auto model = ProjectionModel::initialize(ep.support.x.rows(), out_dim, seed);
    const auto rep = finite_difference_check(model, ep, head, h, step,
                                             threshold.value_or(default_gradcheck_threshold(head.metric)));
    py::dict d;
    d["max_rel_error"] = rep.max_rel_error;
    d["max_rel_error_weight"] = rep.max_rel_error_weight;
    d["max_rel_error_bias"] = rep.max_rel_error_bias;
    d["threshold"] = rep.threshold;
    d["parameters"] = rep.parameters;
    d["passed"] = rep.passed;
    return d;
  }, py::arg("episode"), py::arg("hierarchy"), py::arg("metric") = "euclidean", py::arg("out_dim") = 4,
     py::arg("seed") = 0, py::arg("step") = 1e-6, py::arg("threshold") = py::none(), py::arg("tau") = 1.0,
     py::arg("c") = 0.01, py::arg("r") = 1.0, py::arg("gamma") = 2.0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"protonet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr).");
}
