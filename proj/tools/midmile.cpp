// midmile: command line front end for instance generation, pruning, feature
// extraction, rollouts, training and experiments.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "midmile/env.hpp"
#include "midmile/features.hpp"
#include "midmile/harness.hpp"
#include "midmile/log.hpp"
#include "midmile/policies.hpp"
#include "midmile/pruning.hpp"
#include "midmile/serialize.hpp"
#include "midmile/training.hpp"

using namespace midmile;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

EnvConfig load_config(const std::string& path) {
  return path.empty() ? experiment_config()
                      : env_config_from_json(read_json(path));
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  fn(out);
}

void write_json(const std::string& path, const json& doc) {
  with_output(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

void write_curve(const std::string& path, const std::vector<CurveRow>& curve) {
  if (path.empty()) return;
  with_output(path, [&](std::ostream& out) {
    out << "epoch,rollouts_consumed,mean_return,kl,actor_loss,critic_loss\n";
    for (const CurveRow& r : curve) {
      out << r.epoch << ',' << r.rollouts_consumed << ',' << r.mean_return
          << ',' << r.kl << ',' << r.actor_loss << ',' << r.critic_loss << '\n';
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"middle-mile parcel routing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_path;
  app.add_option("--seed", seed, "random seed");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "output file (stdout if omitted)");

  std::string config_path, in_path, policy = "random", param = "linear";
  std::string curve_path, spec_path, summary_path, optimizer = "adam";
  std::string prune_mode = "all";
  int parcel = 0, radius = 2, episodes = 5, total_rollouts = -1;
  int rollouts = -1, epochs = -1;
  double kl_threshold = -1.0;
  bool phantom = false;
  std::vector<std::string> inputs;

  auto* gen = app.add_subcommand("generate", "sample an instance (reset state)");
  gen->add_option("--config", config_path, "environment config JSON");

  auto* prune = app.add_subcommand("prune", "prune an instance");
  prune->add_option("--in", in_path, "instance JSON")->required();
  prune->add_option("--mode", prune_mode, "all, skip or parcel")
      ->check(CLI::IsMember({"all", "skip", "parcel"}));
  prune->add_option("--parcel", parcel, "parcel id for --mode parcel");

  auto* feat = app.add_subcommand("features", "extract a feature graph");
  feat->add_option("--in", in_path, "instance JSON")->required();
  feat->add_option("--parcel", parcel, "parcel id")->required();
  feat->add_option("--K", radius, "expansion radius")->check(CLI::NonNegativeNumber);
  feat->add_flag("--phantom", phantom, "include phantom weights");

  auto* roll = app.add_subcommand("rollout", "evaluate a policy");
  roll->add_option("--config", config_path, "environment config JSON");
  roll->add_option("--policy", policy,
                   "random, greedy, replay, linear:FILE, linear-argmax:FILE, "
                   "gnn:FILE or gnn-argmax:FILE");
  roll->add_option("--episodes", episodes)->check(CLI::PositiveNumber);

  auto* ppo = app.add_subcommand("train-ppo", "train with PPO");
  ppo->add_option("--param", param)->check(CLI::IsMember({"linear", "gnn"}));
  ppo->add_option("--config", config_path, "environment config JSON");
  ppo->add_option("--curve", curve_path, "learning curve CSV");
  ppo->add_option("--total-rollouts", total_rollouts);
  ppo->add_option("--kl-threshold", kl_threshold);
  ppo->add_option("--K", radius, "feature radius (gnn)");
  ppo->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}));

  auto* sl = app.add_subcommand("train-sl", "supervised learning from routes");
  sl->add_option("--param", param)->check(CLI::IsMember({"linear", "gnn"}));
  sl->add_option("--config", config_path, "environment config JSON");
  sl->add_option("--rollouts", rollouts);
  sl->add_option("--epochs", epochs);
  sl->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}));

  auto* exp = app.add_subcommand("experiment", "run a policy/config grid");
  exp->add_option("--spec", spec_path, "experiment spec JSON");
  exp->add_option("--summary", summary_path, "per-cell min/max/mean CSV");

  auto* bench = app.add_subcommand("bench-pruning", "time transitions with and without pruning");
  bench->add_option("--config", config_path, "environment config JSON");
  bench->add_option("--episodes", episodes)->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot-data", "merge CSVs into long format");
  plot->add_option("inputs", inputs, "CSV files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      write_json(out_path, state_to_json(reset(load_config(config_path), seed)));
    } else if (*prune) {
      MdpState state = state_from_json(read_json(in_path));
      if (prune_mode == "parcel") {
        ReachSet r = parcel_prune(state, parcel);
        json nodes = json::array();
        for (NodeRef n : r.nodes) nodes.push_back(node_to_json(n));
        write_json(out_path, json{{"parcel", parcel},
                                  {"deliverable", r.deliverable},
                                  {"nodes", nodes},
                                  {"edges", r.edges}});
      } else {
        if (prune_mode == "all") prune_all(state);
        else skip_prune(state);
        write_json(out_path, state_to_json(state));
      }
    } else if (*feat) {
      MdpState state = state_from_json(read_json(in_path));
      FeatureOptions opts;
      opts.phantom_weights = phantom;
      write_json(out_path, feature_graph_to_json(
                               extract_feature_graph(state, parcel, radius, opts)));
    } else if (*roll) {
      ExperimentSpec spec;
      spec.base = load_config(config_path);
      spec.policies = {policy};
      spec.parcel_counts = {spec.base.parcelgen.num_parcels};
      spec.hub_counts = {spec.base.netgen.num_hubs};
      spec.parcel_prune = {spec.base.parcel_prune_actions};
      spec.step_prune = {spec.base.prune_on_step};
      spec.strategies = {spec.base.strategy};
      spec.seeds.clear();
      for (int i = 0; i < episodes; ++i) spec.seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
      spec.threads = threads;
      auto rows = run_experiment(spec);
      with_output(out_path, [&](std::ostream& o) { write_rollout_csv(o, rows); });
      for (const auto& r : rows) {
        if (!r.error.empty()) throw std::runtime_error(r.error);
      }
    } else if (*ppo) {
      Parameterization p = parameterization_from_string(param);
      PpoConfig cfg = ppo_defaults(p);
      if (total_rollouts > 0) cfg.total_rollouts = total_rollouts;
      if (kl_threshold > 0.0) cfg.kl_threshold = kl_threshold;
      cfg.radius = radius;
      cfg.optimizer = optimizer_from_string(optimizer);
      TrainResult res = train_ppo(load_config(config_path), cfg, p, seed);
      write_json(out_path, res.model->to_json());
      write_curve(curve_path, res.curve);
    } else if (*sl) {
      Parameterization p = parameterization_from_string(param);
      SlConfig cfg = sl_defaults(p);
      if (rollouts > 0) cfg.rollouts = rollouts;
      if (epochs > 0) cfg.epochs = epochs;
      cfg.optimizer = optimizer_from_string(optimizer);
      SlResult res = train_supervised(load_config(config_path), cfg, p, seed);
      write_json(out_path, res.model->to_json());
      for (std::size_t e = 0; e < res.report.epoch_loss.size(); ++e) {
        spdlog::info("epoch {} loss {:.4f}", e, res.report.epoch_loss[e]);
      }
    } else if (*exp) {
      ExperimentSpec spec = spec_path.empty() ? ExperimentSpec{}
                                              : experiment_from_json(read_json(spec_path));
      if (app.count("--threads") > 0) spec.threads = threads;
      auto rows = run_experiment(spec);
      with_output(out_path, [&](std::ostream& o) { write_rows_csv(o, rows); });
      if (!summary_path.empty()) {
        with_output(summary_path,
                    [&](std::ostream& o) { write_summary_csv(o, summarize(rows)); });
      }
    } else if (*bench) {
      auto table = bench_pruning(load_config(config_path), episodes, seed);
      with_output(out_path, [&](std::ostream& o) { write_bench_csv(o, table); });
    } else if (*plot) {
      with_output(out_path, [&](std::ostream& o) { emit_plot_data(inputs, o); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
