#include "midmile/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "midmile/policies.hpp"

namespace midmile {

void validate(const ExperimentSpec& spec) {
  if (spec.policies.empty() || spec.parcel_counts.empty() ||
      spec.hub_counts.empty() || spec.parcel_prune.empty() ||
      spec.step_prune.empty() || spec.strategies.empty()) {
    throw std::invalid_argument("experiment: every grid axis needs a value");
  }
  if (spec.seeds.empty()) throw std::invalid_argument("experiment: no seeds");
  std::set<std::uint64_t> unique(spec.seeds.begin(), spec.seeds.end());
  if (unique.size() != spec.seeds.size()) {
    throw std::invalid_argument("experiment: seeds must be distinct");
  }
  if (spec.threads < 1) throw std::invalid_argument("experiment: threads < 1");
}

ExperimentSpec experiment_from_json(const nlohmann::json& doc) {
  ExperimentSpec spec;
  if (doc.contains("policies")) spec.policies = doc["policies"].get<std::vector<std::string>>();
  if (doc.contains("parcels")) spec.parcel_counts = doc["parcels"].get<std::vector<int>>();
  if (doc.contains("hubs")) spec.hub_counts = doc["hubs"].get<std::vector<int>>();
  if (doc.contains("parcel_prune")) spec.parcel_prune = doc["parcel_prune"].get<std::vector<bool>>();
  if (doc.contains("step_prune")) spec.step_prune = doc["step_prune"].get<std::vector<bool>>();
  if (doc.contains("strategies")) {
    spec.strategies.clear();
    for (const auto& s : doc["strategies"]) {
      spec.strategies.push_back(routing_strategy_from_string(s.get<std::string>()));
    }
  }
  if (doc.contains("seeds")) spec.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
  if (doc.contains("threads")) spec.threads = doc["threads"].get<int>();
  if (doc.contains("horizon")) spec.base.netgen.horizon = doc["horizon"].get<int>();
  if (doc.contains("unit_mode")) spec.base.unit_mode = doc["unit_mode"].get<bool>();
  validate(spec);
  return spec;
}

nlohmann::json experiment_to_json(const ExperimentSpec& spec) {
  nlohmann::json doc;
  doc["policies"] = spec.policies;
  doc["parcels"] = spec.parcel_counts;
  doc["hubs"] = spec.hub_counts;
  doc["parcel_prune"] = spec.parcel_prune;
  doc["step_prune"] = spec.step_prune;
  std::vector<std::string> strategies;
  for (auto s : spec.strategies) strategies.emplace_back(to_string(s));
  doc["strategies"] = strategies;
  doc["seeds"] = spec.seeds;
  doc["threads"] = spec.threads;
  doc["horizon"] = spec.base.netgen.horizon;
  doc["unit_mode"] = spec.base.unit_mode;
  return doc;
}

std::vector<ExperimentCell> expand_grid(const ExperimentSpec& spec) {
  std::vector<ExperimentCell> cells;
  for (const auto& policy : spec.policies)
    for (int parcels : spec.parcel_counts)
      for (int hubs : spec.hub_counts)
        for (bool pp : spec.parcel_prune)
          for (bool sp : spec.step_prune)
            for (RoutingStrategy st : spec.strategies) {
              cells.push_back({policy, parcels, hubs, pp, sp, st});
            }
  return cells;
}

EnvConfig cell_config(const EnvConfig& base, const ExperimentCell& cell) {
  EnvConfig cfg = base;
  cfg.parcelgen.num_parcels = cell.parcels;
  cfg.netgen.num_hubs = cell.hubs;
  cfg.parcel_prune_actions = cell.parcel_prune;
  cfg.prune_on_step = cell.step_prune;
  cfg.strategy = cell.strategy;
  return cfg;
}

namespace {

// Runs fn(i) for i in [0, n) on `threads` workers.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  const auto extra = static_cast<std::size_t>(std::max(0, threads - 1));
  for (std::size_t t = 0; t < std::min(extra, n); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  const auto cells = expand_grid(spec);
  std::vector<ExperimentRow> rows(cells.size() * spec.seeds.size());
  parallel_for(rows.size(), spec.threads, [&](std::size_t i) {
    ExperimentRow& row = rows[i];
    row.cell_index = static_cast<int>(i / spec.seeds.size());
    row.cell = cells[static_cast<std::size_t>(row.cell_index)];
    row.seed = spec.seeds[i % spec.seeds.size()];
    try {
      EnvConfig cfg = cell_config(spec.base, row.cell);
      auto policy = make_policy(row.cell.policy);
      Rng rng = make_rng(row.seed, 7);
      row.stats = run_episode(reset(cfg, row.seed), cfg, *policy, rng);
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("cell {} seed {} failed: {}", row.cell_index, row.seed,
                    e.what());
    }
  });
  return rows;
}

std::vector<CellSummary> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<CellSummary> out;
  for (const ExperimentRow& r : rows) {
    if (out.empty() || out.back().cell_index != r.cell_index) {
      CellSummary s;
      s.cell_index = r.cell_index;
      s.cell = r.cell;
      s.delivered_min = std::numeric_limits<double>::infinity();
      s.delivered_max = -std::numeric_limits<double>::infinity();
      out.push_back(s);
    }
    CellSummary& s = out.back();
    if (!r.error.empty()) {
      ++s.errors;
      continue;
    }
    const double d = r.stats.delivered;
    s.delivered_min = std::min(s.delivered_min, d);
    s.delivered_max = std::max(s.delivered_max, d);
    s.delivered_mean += d;
    s.return_mean += r.stats.episode_return;
    ++s.runs;
  }
  for (CellSummary& s : out) {
    if (s.runs == 0) {
      s.delivered_min = s.delivered_max = 0.0;
      continue;
    }
    s.delivered_mean /= s.runs;
    s.return_mean /= s.runs;
  }
  return out;
}

namespace {

void write_cell(std::ostream& out, const ExperimentCell& c) {
  out << c.policy << ',' << c.parcels << ',' << c.hubs << ','
      << (c.parcel_prune ? 1 : 0) << ',' << (c.step_prune ? 1 : 0) << ','
      << to_string(c.strategy);
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows,
                    bool with_timing) {
  out << "cell,policy,parcels,hubs,parcel_prune,step_prune,strategy,seed,"
         "delivered,failed,return,transitions";
  if (with_timing) out << ",wall_ms,get_actions_ms,step_ms,pruning_ms";
  out << ",error\n";
  for (const ExperimentRow& r : rows) {
    out << r.cell_index << ',';
    write_cell(out, r.cell);
    out << ',' << r.seed << ',' << r.stats.delivered << ',' << r.stats.failed
        << ',' << r.stats.episode_return << ',' << r.stats.transitions;
    if (with_timing) {
      out << ',' << r.stats.wall_ms << ',' << r.stats.get_actions_ms << ','
          << r.stats.step_ms << ',' << r.stats.pruning_ms;
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << err << '\n';
  }
}

void write_summary_csv(std::ostream& out,
                       const std::vector<CellSummary>& summary) {
  out << "cell,policy,parcels,hubs,parcel_prune,step_prune,strategy,runs,"
         "errors,delivered_min,delivered_max,delivered_mean,return_mean\n";
  for (const CellSummary& s : summary) {
    out << s.cell_index << ',';
    write_cell(out, s.cell);
    out << ',' << s.runs << ',' << s.errors << ',' << s.delivered_min << ','
        << s.delivered_max << ',' << s.delivered_mean << ',' << s.return_mean
        << '\n';
  }
}

void write_rollout_csv(std::ostream& out,
                       const std::vector<ExperimentRow>& rows) {
  out << "seed,episode,delivered,failed,return,wall_ms,get_actions_ms,"
         "step_ms,pruning_ms\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const EpisodeStats& s = rows[i].stats;
    out << rows[i].seed << ',' << i << ',' << s.delivered << ',' << s.failed
        << ',' << s.episode_return << ',' << s.wall_ms << ','
        << s.get_actions_ms << ',' << s.step_ms << ',' << s.pruning_ms << '\n';
  }
}

std::vector<BenchCell> bench_pruning(const EnvConfig& cfg, int episodes,
                                     std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("bench: episodes < 1");
  std::vector<std::uint64_t> seeds;
  Rng stream = make_rng(seed, 61);
  for (int i = 0; i < episodes; ++i) seeds.push_back(stream());
  std::vector<MdpState> instances;
  for (std::uint64_t s : seeds) instances.push_back(reset(cfg, s));

  std::vector<BenchCell> table;
  for (bool pp : {false, true}) {
    for (bool sp : {false, true}) {
      EnvConfig c = cfg;
      c.parcel_prune_actions = pp;
      c.prune_on_step = sp;
      std::vector<double> per;
      double transitions = 0.0;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        RandomPolicy policy;
        Rng rng = make_rng(seeds[i], 62);
        EpisodeStats st = run_episode(instances[i], c, policy, rng);
        const double busy =
            st.get_actions_ms + st.policy_ms + st.step_ms + st.pruning_ms;
        per.push_back(st.transitions > 0 ? busy / st.transitions : 0.0);
        transitions += st.transitions;
      }
      BenchCell cell;
      cell.parcel_prune = pp;
      cell.step_prune = sp;
      cell.episodes = episodes;
      double mean = 0.0;
      for (double v : per) mean += v;
      mean /= static_cast<double>(per.size());
      double var = 0.0;
      for (double v : per) var += (v - mean) * (v - mean);
      cell.mean_ms = mean;
      cell.stddev_ms =
          per.size() > 1 ? std::sqrt(var / static_cast<double>(per.size() - 1)) : 0.0;
      cell.mean_transitions = transitions / static_cast<double>(per.size());
      table.push_back(cell);
    }
  }
  return table;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchCell>& table) {
  out << "parcel_prune,step_prune,episodes,mean_ms_per_transition,stddev_ms,"
         "mean_transitions\n";
  for (const BenchCell& c : table) {
    out << (c.parcel_prune ? 1 : 0) << ',' << (c.step_prune ? 1 : 0) << ','
        << c.episodes << ',' << c.mean_ms << ',' << c.stddev_ms << ','
        << c.mean_transitions << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void emit_plot_data(const std::vector<std::string>& csv_paths,
                    std::ostream& out) {
  out << "source,row,variable,value\n";
  std::vector<std::string> header;
  for (const std::string& path : csv_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("plot data: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) continue;
    auto cols = split_csv_line(line);
    if (header.empty()) {
      header = cols;
    } else if (cols != header) {
      throw std::runtime_error("plot data: schema of " + path +
                               " differs from the first input");
    }
    long row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != cols.size()) {
        throw std::runtime_error("plot data: " + path + " row " +
                                 std::to_string(row) + " has " +
                                 std::to_string(fields.size()) + " fields");
      }
      for (std::size_t k = 0; k < cols.size(); ++k) {
        out << path << ',' << row << ',' << cols[k] << ',' << fields[k] << '\n';
      }
      ++row;
    }
  }
}

}  // namespace midmile
