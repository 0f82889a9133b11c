#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "midmile/dynamics.hpp"

namespace midmile {

struct ExperimentCell {
  std::string policy;  // make_policy spec
  int parcels = 200;
  int hubs = 10;
  bool parcel_prune = false;
  bool step_prune = false;
  RoutingStrategy strategy = RoutingStrategy::kOneStep;
};

struct ExperimentSpec {
  EnvConfig base = experiment_config();
  std::vector<std::string> policies{"random"};
  std::vector<int> parcel_counts{200};
  std::vector<int> hub_counts{10};
  std::vector<bool> parcel_prune{false};
  std::vector<bool> step_prune{false};
  std::vector<RoutingStrategy> strategies{RoutingStrategy::kOneStep};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int threads = 1;
};

void validate(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentSpec& spec);

// Cartesian product in declaration order (policy outermost).
std::vector<ExperimentCell> expand_grid(const ExperimentSpec& spec);

EnvConfig cell_config(const EnvConfig& base, const ExperimentCell& cell);

struct ExperimentRow {
  int cell_index = 0;
  ExperimentCell cell;
  std::uint64_t seed = 0;
  EpisodeStats stats;
  std::string error;  // empty on success
};

// One episode per (cell, seed), on a pool of spec.threads workers. Rows come
// back ordered by (cell, seed). Instances depend only on the seed and the
// cell's environment parameters.
std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec);

struct CellSummary {
  int cell_index = 0;
  ExperimentCell cell;
  int runs = 0;
  int errors = 0;
  double delivered_min = 0.0;
  double delivered_max = 0.0;
  double delivered_mean = 0.0;
  double return_mean = 0.0;
};

std::vector<CellSummary> summarize(const std::vector<ExperimentRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows,
                    bool with_timing = true);
void write_summary_csv(std::ostream& out,
                       const std::vector<CellSummary>& summary);

// Per-episode rollout statistics: seed, episode, delivered, failed, return,
// wall_ms, get_actions_ms, step_ms, pruning_ms.
void write_rollout_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);

struct BenchCell {
  bool parcel_prune = false;
  bool step_prune = false;
  int episodes = 0;
  double mean_ms = 0.0;  // per transition
  double stddev_ms = 0.0;
  double mean_transitions = 0.0;
};

// Wall time per transition (action query, policy call, step and pruning)
// under the uniform random policy, for all four pruning combinations.
std::vector<BenchCell> bench_pruning(const EnvConfig& cfg, int episodes,
                                     std::uint64_t seed);
void write_bench_csv(std::ostream& out, const std::vector<BenchCell>& table);

// Long format: source,row,variable,value. Every input must share one
// header; an empty input list yields the header alone.
void emit_plot_data(const std::vector<std::string>& csv_paths,
                    std::ostream& out);

}  // namespace midmile
