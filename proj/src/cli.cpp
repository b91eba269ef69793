#include "protonet/cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "protonet/error.hpp"
#include "protonet/geometry.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/io.hpp"
#include "protonet/synthetic.hpp"
#include "protonet/trainer.hpp"

namespace protonet {

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> embeddings, hierarchy, splits, model, metric;
  std::optional<std::uint64_t> seed;
  std::optional<int> k, n, n_query, episodes, threads;
  std::optional<double> tau, c, r, gamma;
  // train
  std::optional<int> epochs, episodes_per_epoch, batch_episodes, val_episodes, out_dim;
  std::optional<double> lr, momentum, weight_decay;
  std::optional<std::string> checkpoint_out;
  // gradcheck
  std::optional<double> fd_step;

  Json overrides(const std::string& mode) const {
    Json o = Json::object();
    o["mode"] = mode;
    auto put = [&](const char* key, const auto& value) {
      if (value) o[key] = *value;
    };
    put("embeddings", embeddings);
    put("hierarchy", hierarchy);
    put("splits", splits);
    put("model", model);
    put("metric", metric);
    put("seed", seed);
    put("k", k);
    put("n", n);
    put("n_query", n_query);
    put("episodes", episodes);
    put("threads", threads);
    put("tau", tau);
    put("c", c);
    put("r", r);
    put("gamma", gamma);
    put("epochs", epochs);
    put("episodes_per_epoch", episodes_per_epoch);
    put("batch_episodes", batch_episodes);
    put("val_episodes", val_episodes);
    put("out_dim", out_dim);
    put("lr", lr);
    put("momentum", momentum);
    put("weight_decay", weight_decay);
    put("fd_step", fd_step);
    return o;
  }
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "JSON config file, or a report whose echoed config to reuse");
  cmd.add_option("--embeddings", f.embeddings, "CSV embeddings (id,label,e0,...)");
  cmd.add_option("--hierarchy", f.hierarchy, "hierarchy file, one parent<TAB>child edge per line");
  cmd.add_option("--splits", f.splits, "JSON {base, val, novel} class lists");
  cmd.add_option("--seed", f.seed, "master seed");
  cmd.add_option("--metric", f.metric, "euclidean | cosine | hierarchical | hyperbolic");
  cmd.add_option("--k", f.k, "classes per episode");
  cmd.add_option("--n", f.n, "support samples per class");
  cmd.add_option("--n-query", f.n_query, "query samples per class");
  cmd.add_option("--episodes", f.episodes, "number of evaluation episodes");
  cmd.add_option("--tau", f.tau, "softmax temperature");
  cmd.add_option("--c", f.c, "curvature parameter of the hyperbolic head");
  cmd.add_option("--r", f.r, "feature clipping radius of the hyperbolic head");
  cmd.add_option("--gamma", f.gamma, "level-weight base of the hierarchical head");
  cmd.add_option("--threads", f.threads, "worker threads (default: $PROTONET_THREADS or 1)");
}

struct Inputs {
  EmbeddingSet data;
  ClassHierarchy hierarchy;
  DatasetSplit split;
};

Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.embeddings.empty() || cfg.hierarchy.empty() || cfg.splits.empty()) {
    throw Error(ErrorCode::invalid_argument, "--embeddings, --hierarchy and --splits are required");
  }
  Inputs in{load_embeddings(cfg.embeddings), read_hierarchy_file(cfg.hierarchy), load_splits(cfg.splits)};
  validate_labels_against(in.data, in.hierarchy);
  validate_split(in.split, in.data, &in.hierarchy);
  return in;
}

RunConfig resolve_config(const Flags& flags, const std::string& mode) {
  std::optional<std::filesystem::path> path;
  if (flags.config) path = *flags.config;
  return load_config(path, flags.overrides(mode));
}

int cmd_eval(const Flags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags, "eval");
  Inputs in = load_inputs(cfg);
  EmbeddingSet data = std::move(in.data);
  if (!cfg.model.empty()) data = project(load_checkpoint(cfg.model).model, data);
  const EvalReport report = run_evaluation(data, in.split.novel, in.hierarchy, cfg.head, cfg.eval_options());
  out << dump_json(eval_report_to_json(report, cfg));
  return 0;
}

int cmd_train(const Flags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags, "train");
  const Inputs in = load_inputs(cfg);
  const TrainResult result = meta_train(in.data, in.split, in.hierarchy, cfg.train_config());
  const ProjectionModel initial =
      ProjectionModel::initialize(in.data.dim(), cfg.out_dim == 0 ? in.data.dim() : cfg.out_dim, cfg.seed);
  const EvalOptions options = cfg.eval_options();
  const EvalReport novel_initial =
      run_evaluation(project(initial, in.data), in.split.novel, in.hierarchy, cfg.head, options);
  const EvalReport novel_best =
      run_evaluation(project(result.best, in.data), in.split.novel, in.hierarchy, cfg.head, options);
  if (flags.checkpoint_out) {
    save_checkpoint(*flags.checkpoint_out, Checkpoint{result.best, result.state, config_hash(cfg)});
  }
  out << dump_json(train_report_to_json(result, cfg, novel_initial, novel_best));
  return 0;
}

SyntheticData small_synthetic(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 6;
  spec.samples_per_leaf = 20;
  spec.novel_classes = 3;
  spec.val_classes = 3;
  spec.seed = seed;
  return make_synthetic(spec);
}

int cmd_gradcheck(const Flags& flags, std::ostream& out) {
  RunConfig cfg = resolve_config(flags, "gradcheck");
  std::optional<Inputs> in;
  if (!cfg.embeddings.empty() || !cfg.hierarchy.empty() || !cfg.splits.empty()) {
    in = load_inputs(cfg);
  } else {
    SyntheticData synth = small_synthetic(cfg.seed);
    in = Inputs{std::move(synth.data), std::move(synth.hierarchy), std::move(synth.split)};
  }
  const std::uint64_t episode_index = 0;
  const Episode ep = sample_episode_at(in->data, in->split.base, cfg.shape, cfg.seed, episode_index);
  const ProjectionModel model =
      ProjectionModel::initialize(in->data.dim(), cfg.out_dim == 0 ? in->data.dim() : cfg.out_dim, cfg.seed);
  const GradCheckReport report = finite_difference_check(model, ep, cfg.head, in->hierarchy, cfg.fd_step,
                                                         default_gradcheck_threshold(cfg.head.metric));
  out << dump_json(gradcheck_report_to_json(report, cfg, episode_index));
  return report.passed ? 0 : 3;
}

// Built-in property checks on random inputs; each records the measured
// quantity against its bound.
int cmd_selftest(const Flags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags, "selftest");
  Rng rng(derive_seed(cfg.seed, 0x7E57));
  Json checks = Json::array();
  bool all = true;
  auto record = [&](const std::string& name, double value, double bound) {
    const bool ok = value < bound;
    all = all && ok;
    checks.push_back(Json{{"name", name}, {"value", value}, {"bound", bound}, {"passed", ok}});
  };
  auto ball_point = [&](int dim, double c, double max_fraction) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    const double radius = max_fraction * std::pow(rng.uniform(), 1.0 / dim) / std::sqrt(c);
    return Vector(v.normalized() * radius);
  };

  for (double c : {0.01, 1.0}) {
    double inverse = 0.0, asymmetry = 0.0, triangle = 0.0, roundtrip = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const Vector x = ball_point(4, c, 0.9), y = ball_point(4, c, 0.9), z = ball_point(4, c, 0.9);
      inverse = std::max(inverse, kernel::mobius_add(-x, x, c).norm());
      asymmetry = std::max(asymmetry, std::abs(kernel::distance(x, y, c) - kernel::distance(y, x, c)));
      triangle = std::max(triangle, kernel::distance(x, z, c) - kernel::distance(x, y, c) - kernel::distance(y, z, c));
      roundtrip = std::max(roundtrip, (kernel::klein_to_poincare(kernel::poincare_to_klein(x, c), c) - x).norm());
    }
    const std::string tag = " (c=" + std::string(c == 1.0 ? "1" : "0.01") + ")";
    record("mobius left inverse" + tag, inverse, 1e-12);
    record("distance asymmetry" + tag, asymmetry, 1e-300);
    record("triangle inequality excess" + tag, triangle, 1e-9);
    record("klein roundtrip error" + tag, roundtrip, 1e-12);
  }

  SyntheticData synth = small_synthetic(cfg.seed);
  const EpisodeShape shape{3, 2, 2};
  for (Metric m : {Metric::euclidean, Metric::cosine, Metric::hierarchical, Metric::hyperbolic}) {
    HeadConfig head = cfg.head;
    head.metric = m;
    const Episode ep = sample_episode_at(synth.data, synth.split.base, shape, cfg.seed, 0);
    const ProjectionModel model = ProjectionModel::initialize(synth.data.dim(), 4, cfg.seed);
    const GradCheckReport gc =
        finite_difference_check(model, ep, head, synth.hierarchy, 1e-6, default_gradcheck_threshold(m));
    record("gradient check " + std::string(to_string(m)), gc.max_rel_error, gc.threshold);
  }

  out << dump_json(Json{{"format", "protonet-selftest-report"},
                        {"version", 1},
                        {"config", config_to_json(cfg)},
                        {"checks", checks},
                        {"passed", all}});
  return all ? 0 : 3;
}

struct SynthFlags {
  std::string out_dir = ".";
  SyntheticSpec spec;
};

int cmd_synth(const SynthFlags& flags, std::ostream& out) {
  const SyntheticData synth = make_synthetic(flags.spec);
  const std::filesystem::path dir(flags.out_dir);
  std::filesystem::create_directories(dir);
  write_embeddings(dir / "embeddings.csv", synth.data);
  write_text_file(dir / "hierarchy.tsv", serialize_hierarchy(synth.hierarchy));
  write_text_file(dir / "splits.json", dump_json(splits_to_json(synth.split)));
  out << dump_json(Json{{"embeddings", (dir / "embeddings.csv").string()},
                        {"hierarchy", (dir / "hierarchy.tsv").string()},
                        {"splits", (dir / "splits.json").string()},
                        {"records", synth.data.size()},
                        {"dim", synth.data.dim()}});
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot prototype classification over precomputed embeddings"};
  app.require_subcommand(1);

  Flags eval_flags, train_flags, grad_flags, self_flags;
  auto* eval = app.add_subcommand("eval", "evaluate a head on novel-class episodes");
  add_common(*eval, eval_flags);
  eval->add_option("--model", eval_flags.model, "projection checkpoint applied before evaluation");

  auto* train = app.add_subcommand("train", "meta-train a linear projection on base-class episodes");
  add_common(*train, train_flags);
  train->add_option("--epochs", train_flags.epochs);
  train->add_option("--episodes-per-epoch", train_flags.episodes_per_epoch);
  train->add_option("--batch-episodes", train_flags.batch_episodes);
  train->add_option("--val-episodes", train_flags.val_episodes);
  train->add_option("--out-dim", train_flags.out_dim, "projection output dimension (0 = input dimension)");
  train->add_option("--lr", train_flags.lr);
  train->add_option("--momentum", train_flags.momentum);
  train->add_option("--weight-decay", train_flags.weight_decay);
  train->add_option("--checkpoint-out", train_flags.checkpoint_out, "write the best-on-val projection here");

  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
  add_common(*grad, grad_flags);
  grad->add_option("--fd-step", grad_flags.fd_step, "central-difference step");
  grad->add_option("--out-dim", grad_flags.out_dim);

  auto* self = app.add_subcommand("selftest", "run built-in geometry and gradient checks");
  add_common(*self, self_flags);

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "write a synthetic three-level dataset");
  synth->add_option("--out-dir", synth_flags.out_dir);
  synth->add_option("--seed", synth_flags.spec.seed);
  synth->add_option("--dim", synth_flags.spec.dim);
  synth->add_option("--supers", synth_flags.spec.super_classes);
  synth->add_option("--leaves", synth_flags.spec.leaves_per_super);
  synth->add_option("--samples", synth_flags.spec.samples_per_leaf);
  synth->add_option("--noise", synth_flags.spec.noise);
  synth->add_option("--nuisance-dims", synth_flags.spec.nuisance_dims);
  synth->add_option("--nuisance-noise", synth_flags.spec.nuisance_noise);
  synth->add_option("--novel", synth_flags.spec.novel_classes);
  synth->add_option("--val", synth_flags.spec.val_classes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error [usage]: " << e.what() << "\n";
    return 1;
  }

  try {
    if (eval->parsed()) return cmd_eval(eval_flags, out);
    if (train->parsed()) return cmd_train(train_flags, out);
    if (grad->parsed()) return cmd_gradcheck(grad_flags, out);
    if (self->parsed()) return cmd_selftest(self_flags, out);
    if (synth->parsed()) return cmd_synth(synth_flags, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.category()) << "/" << to_string(e.code()) << "]: " << e.message() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    err << "error [validation]: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::validation);
  }
  return 1;
}

}  // namespace protonet
