// Pipeline entry point: dataset generation, target-model training, explainer
// training, explanation, evaluation and the cut-vertex benchmark. Progress
// goes to stderr, machine-readable artifacts to the declared output paths.
// Every random choice descends from --seed, so reruns reproduce outputs byte
// for byte regardless of --threads.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "gflowx/checkpoint.hpp"
#include "gflowx/dataset.hpp"
#include "gflowx/explainer.hpp"
#include "gflowx/gnn.hpp"
#include "gflowx/metrics.hpp"
#include "gflowx/rng.hpp"

namespace {

using namespace gflowx;

std::string fmt6(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

struct ExplainerBundle {
  PolicyParams policy;
  Mlp locator;
  Mlp log_z;
};

void save_bundle(const std::string& path, const PolicyParams& policy,
                 const Mlp& locator, const Mlp& log_z) {
  std::vector<NamedTensor> ts = policy.tensors();
  append_mlp_tensors(ts, locator, "locator.");
  append_mlp_tensors(ts, log_z, "logz.");
  save_tensors(path, ts);
}

ExplainerBundle load_bundle(const std::string& path) {
  const std::vector<NamedTensor> ts = load_tensors(path);
  ExplainerBundle b;
  b.policy = PolicyParams::from_tensors(ts);
  b.locator = mlp_from_tensors(ts, "locator.");
  b.log_z = mlp_from_tensors(ts, "logz.");
  return b;
}

void add_env_flags(CLI::App* cmd, EnvConfig& env) {
  cmd->add_option("--max-nodes", env.max_nodes, "subgraph size cap")
      ->capture_default_str();
  cmd->add_option("--hops", env.hops, "computation graph radius (node tasks)")
      ->capture_default_str();
  cmd->add_flag("--one-hot", env.reward.one_hot,
                "reward from the predicted class alone instead of the soft prediction");
  cmd->add_option("--reward-scale", env.reward.scale, "sharpening exponent on the reward")
      ->capture_default_str();
}

// ---------------------------------------------------------------- gen

struct GenOpts {
  std::string kind, out;
  std::uint64_t seed = 1;
  GenParams p;
};

void run_gen(const GenOpts& o) {
  const Dataset ds = gen_dataset(o.kind, o.p, o.seed);
  save_dataset(ds, o.out);
  long edges = 0, nodes = 0;
  for (const Graph& g : ds.graphs) {
    edges += g.num_edges();
    nodes += g.num_nodes();
  }
  std::fprintf(stderr, "%s: %zu graph(s), %ld nodes, %ld edges, %zu instances, %d classes -> %s\n",
               o.kind.c_str(), ds.graphs.size(), nodes, edges, ds.instances.size(),
               ds.num_classes, o.out.c_str());
}

// ---------------------------------------------------------------- train-gnn

struct TrainGnnOpts {
  std::string data, out, log;
  GnnConfig cfg;
};

void run_train_gnn(const TrainGnnOpts& o) {
  const Dataset ds = load_dataset(o.data);
  std::vector<GnnTrainLogRow> rows;
  const GnnModel model = train_gnn(ds, o.cfg, &rows);
  model.save(o.out);
  if (!o.log.empty()) {
    std::ofstream out = open_out(o.log);
    out << "epoch,loss,accuracy\n";
    for (const auto& r : rows) {
      out << r.epoch << ',' << fmt6(r.loss) << ',' << fmt6(r.accuracy) << '\n';
    }
  }
  std::fprintf(stderr, "train accuracy %.4f -> %s\n", model.train_accuracy, o.out.c_str());
}

// ---------------------------------------------------------------- train-explainer

struct TrainExplainerOpts {
  std::string data, model, out, log;
  PolicyConfig pcfg;
  TrainConfig tcfg;
  int epochs = 0;        // 0: 50 for node tasks, 100 for graph tasks
  int threads = 0;       // 0: all available cores
  bool raw_flow = false; // inverse of tcfg.loss.log_space
};

void run_train_explainer(TrainExplainerOpts o) {
  const Dataset ds = load_dataset(o.data);
  const GnnModel model = GnnModel::load(o.model);
  o.tcfg.epochs = o.epochs > 0 ? o.epochs : (ds.task == Task::kNode ? 50 : 100);
  o.tcfg.threads = resolve_threads(o.threads);
  o.tcfg.loss.log_space = !o.raw_flow;
  o.tcfg.on_epoch = [&](const EpochLog& l) {
    std::fprintf(stderr, "epoch %3d  loss %10.4f  reward %.4f  %6.0f ms\n", l.epoch,
                 l.mean_loss, l.mean_reward, l.wall_ms);
  };
  const TrainResult res = train_explainer(ds, model, o.pcfg, o.tcfg);
  save_bundle(o.out, res.policy, res.locator, res.log_z);
  if (!o.log.empty()) {
    std::ofstream out = open_out(o.log);
    out << "epoch,mean_loss,mean_reward,wall_ms\n";
    for (const EpochLog& l : res.log) {
      out << l.epoch << ',' << fmt6(l.mean_loss) << ',' << fmt6(l.mean_reward) << ','
          << fmt6(l.wall_ms) << '\n';
    }
  }
  std::fprintf(stderr, "explainer -> %s\n", o.out.c_str());
}

// ---------------------------------------------------------------- explain

struct ExplainOpts {
  std::string data, model, policy, out, dot;
  int instance = -1;
  bool sample = false;
  std::uint64_t seed = 1;
  EnvConfig env;
};

void run_explain(const ExplainOpts& o) {
  const Dataset ds = load_dataset(o.data);
  const GnnModel model = GnnModel::load(o.model);
  const ExplainerBundle b = load_bundle(o.policy);
  const bool node_task = ds.task == Task::kNode;
  const InstanceContext ctx = node_task
                                  ? make_node_context(ds, model, o.instance, o.env)
                                  : make_graph_context(ds, model, o.instance, o.env);
  int v0 = ctx.root;
  if (!node_task) {
    if (b.locator.empty()) {
      throw std::runtime_error("graph task but the checkpoint holds no locator");
    }
    v0 = locate_start(b.locator, model, *ctx.local);
  }
  Rng rng(derive_seed(o.seed, {seed_tag::kEval, static_cast<std::uint64_t>(o.instance)}));
  const Explanation e = explain(b.policy, ctx, v0, o.env, o.sample ? &rng : nullptr);
  write_explanation_csv(o.out, e);
  if (!o.dot.empty()) {
    write_explanation_dot(o.dot, e, node_task ? ds.graph() : *ctx.local);
  }
  std::fprintf(stderr, "instance %d: %zu nodes, %zu edges -> %s\n", o.instance,
               e.nodes.size(), e.edges.size(), o.out.c_str());
}

// ---------------------------------------------------------------- eval

struct EvalCliOpts {
  std::string data, model, policy, out;
  EvalOptions opt;
};

void run_eval(const EvalCliOpts& o) {
  const Dataset ds = load_dataset(o.data);
  const GnnModel model = GnnModel::load(o.model);
  const ExplainerBundle b = load_bundle(o.policy);
  const EvalResult res = evaluate(ds, model, b.policy, b.locator, o.opt);
  write_metrics_csv(o.out, res);
  std::printf("auc %s\nfidelity %s\nsparsity %s\ntopk %s\n", fmt6(res.auc).c_str(),
              fmt6(res.fidelity).c_str(), fmt6(res.sparsity).c_str(),
              fmt6(res.topk).c_str());
}

// ---------------------------------------------------------------- bench-cutvertex

struct BenchOpts {
  int n = 200, trials = 5;
  std::uint64_t seed = 1;
  std::string out;
};

void run_bench(const BenchOpts& o) {
  const std::vector<BenchRow> rows = bench_cutvertex(o.n, o.trials, o.seed);
  write_bench_csv(o.out, rows);
  double inc = 0, stat = 0;
  int count = 0;
  for (const BenchRow& r : rows) {
    if (r.step == o.n) {
      inc += r.incremental_ns;
      stat += r.static_ns;
      ++count;
    }
  }
  std::fprintf(stderr, "step %d means over %d trial(s): incremental %.0f ns, static %.0f ns\n",
               o.n, count, inc / count, stat / count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subgraph explanations for small graph neural networks"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* cgen = app.add_subcommand("gen", "generate a synthetic benchmark dataset");
  cgen->add_option("--kind", gen.kind, "dataset family")
      ->required()
      ->check(CLI::IsMember(
          {"ba-shapes", "ba-community", "tree-cycles", "tree-grid", "ba-2motifs"}));
  cgen->add_option("--out", gen.out, "dataset file to write")->required();
  cgen->add_option("--seed", gen.seed, "root seed")->capture_default_str();
  cgen->add_option("--base-nodes", gen.p.base_nodes, "base graph size (-1: per-kind default)")
      ->capture_default_str();
  cgen->add_option("--num-motifs", gen.p.num_motifs, "planted motif count")
      ->capture_default_str();
  cgen->add_option("--noise-edges", gen.p.noise_edges, "random extra edges (-1: default)")
      ->capture_default_str();
  cgen->add_option("--ba-m", gen.p.ba_m, "preferential attachment edges per node (-1: default)")
      ->capture_default_str();
  cgen->add_option("--feature-dim", gen.p.feature_dim, "node feature width")
      ->capture_default_str();
  cgen->add_option("--num-graphs", gen.p.num_graphs, "graph count (ba-2motifs)")
      ->capture_default_str();
  cgen->add_option("--graph-base-nodes", gen.p.graph_base_nodes, "per-graph base size (ba-2motifs)")
      ->capture_default_str();
  cgen->add_option("--inter-edges", gen.p.inter_edges,
                   "bridge edges between communities (-1: default)")
      ->capture_default_str();
  cgen->callback([&] { run_gen(gen); });

  TrainGnnOpts tg;
  auto* ctg = app.add_subcommand("train-gnn", "train the model to be explained");
  ctg->add_option("--data", tg.data, "dataset file")->required();
  ctg->add_option("--out", tg.out, "model checkpoint to write")->required();
  ctg->add_option("--log", tg.log, "training log CSV");
  ctg->add_option("--hidden", tg.cfg.hidden, "convolution width")->capture_default_str();
  ctg->add_option("--lr", tg.cfg.lr, "Adam learning rate")->capture_default_str();
  ctg->add_option("--epochs", tg.cfg.epochs, "full-batch steps")->capture_default_str();
  ctg->add_option("--train-fraction", tg.cfg.train_fraction, "node split (node tasks)")
      ->capture_default_str();
  ctg->add_option("--seed", tg.cfg.seed, "root seed")->capture_default_str();
  ctg->callback([&] { run_train_gnn(tg); });

  TrainExplainerOpts te;
  auto* cte = app.add_subcommand("train-explainer", "fit the subgraph-growing policy");
  cte->add_option("--data", te.data, "dataset file")->required();
  cte->add_option("--model", te.model, "model checkpoint")->required();
  cte->add_option("--out", te.out, "explainer checkpoint to write")->required();
  cte->add_option("--log", te.log, "training log CSV");
  cte->add_option("--batch", te.tcfg.batch, "episodes per step")->capture_default_str();
  cte->add_option("--epochs", te.epochs, "steps (0: 50 node tasks, 100 graph tasks)")
      ->capture_default_str();
  cte->add_option("--lr", te.tcfg.lr, "Adam learning rate")->capture_default_str();
  cte->add_option("--explore-eps", te.tcfg.explore_eps, "uniform action mixing while sampling")
      ->capture_default_str();
  cte->add_flag("--tb", te.tcfg.use_tb, "trajectory balance objective instead of flow matching");
  cte->add_option("--locator-sample", te.tcfg.locator_sample,
                  "graph fraction refitting the start locator per epoch")
      ->capture_default_str();
  cte->add_option("--threads", te.threads, "worker threads (0: all cores)")
      ->capture_default_str();
  cte->add_option("--seed", te.tcfg.seed, "root seed")->capture_default_str();
  cte->add_flag("--raw-flow", te.raw_flow, "match flows in raw units instead of log space");
  cte->add_option("--hidden", te.pcfg.hidden, "policy width")->capture_default_str();
  cte->add_option("--alpha", te.pcfg.alpha, "propagation teleport weight")
      ->capture_default_str();
  cte->add_option("--appnp-layers", te.pcfg.appnp_layers, "propagation depth")
      ->capture_default_str();
  cte->add_flag("--stop-over-all", te.pcfg.stop_over_all,
                "stop attention over subgraph and frontier instead of frontier only");
  cte->add_option("--flow-clamp", te.pcfg.flow_clamp, "log flow bound")->capture_default_str();
  add_env_flags(cte, te.tcfg.env);
  cte->callback([&] { run_train_explainer(te); });

  ExplainOpts ex;
  auto* cex = app.add_subcommand("explain", "grow one explanation subgraph");
  cex->add_option("--data", ex.data, "dataset file")->required();
  cex->add_option("--model", ex.model, "model checkpoint")->required();
  cex->add_option("--policy", ex.policy, "explainer checkpoint")->required();
  cex->add_option("--instance", ex.instance, "node id (node tasks) or graph index")
      ->required();
  cex->add_option("--out", ex.out, "explanation CSV to write")->required();
  cex->add_option("--dot", ex.dot, "graphviz rendering");
  cex->add_flag("--sample", ex.sample, "sample the policy instead of greedy flows");
  cex->add_option("--seed", ex.seed, "root seed (with --sample)")->capture_default_str();
  add_env_flags(cex, ex.env);
  cex->callback([&] { run_explain(ex); });

  EvalCliOpts ev;
  auto* cev = app.add_subcommand("eval", "score explanations against the motif ground truth");
  cev->add_option("--data", ev.data, "dataset file")->required();
  cev->add_option("--model", ev.model, "model checkpoint")->required();
  cev->add_option("--policy", ev.policy, "explainer checkpoint")->required();
  cev->add_option("--out", ev.out, "metrics CSV to write")->required();
  cev->add_option("--topk", ev.opt.topk, "accuracy cutoff (0: per-instance motif size)")
      ->capture_default_str();
  cev->add_flag("--sample", ev.opt.sample, "sample the policy instead of greedy flows");
  cev->add_option("--seed", ev.opt.seed, "root seed (with --sample)")->capture_default_str();
  cev->add_flag("--auc-all-edges", ev.opt.auc_all_edges,
                "rank every input edge, not just the computation graph");
  add_env_flags(cev, ev.opt.env);
  cev->callback([&] { run_eval(ev); });

  BenchOpts be;
  auto* cbe = app.add_subcommand("bench-cutvertex",
                                 "incremental tracker against static recomputation");
  cbe->add_option("--n", be.n, "growth steps per trial")->check(CLI::PositiveNumber);
  cbe->add_option("--trials", be.trials, "independent growths")->check(CLI::PositiveNumber);
  cbe->add_option("--seed", be.seed, "root seed")->capture_default_str();
  cbe->add_option("--out", be.out, "timing CSV to write")->required();
  cbe->callback([&] { run_bench(be); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
