// qsched: delay-power queue scheduling toolkit.
//
// Subcommands:
//   solve     exact average-reward solution (gain + policy.csv)
//   train     one learning run (metrics.csv, policy.csv, qtable.csv)
//   tradeoff  enumerate monotone policies, flag the delay-power frontier
//   sweep     re-solve across a lambda or alpha grid (sweep.csv)
//   compare   multiple agents x seeds summary (compare.csv + per-run metrics)
//
// Every command reads an optional key=value config file; command-line flags
// override file keys. All outputs are written atomically into --out, along
// with a run_meta.json echoing the effective configuration, and every
// command is deterministic given its inputs (seeds included).

#include <CLI11.hpp>
#include <json.hpp>

#include <qsched/csv.hpp>
#include <qsched/exact.hpp>
#include <qsched/learners.hpp>
#include <qsched/queue_model.hpp>
#include <qsched/rng.hpp>
#include <qsched/run_config.hpp>
#include <qsched/sim.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;
using namespace qsched;

struct FlagValues {
  std::string config;
  std::string out;
  int B = 0, M = 0, C = 0, ref_state = 0;
  double alpha = 0, lambda = 0, sigma = 0, delta = 0, epsilon = 0, phi = 0,
         theta = 0;
  std::int64_t horizon = 0, max_policies = 0;
  std::string seeds, agents, lambdas, alphas;
};

void add_shared_flags(CLI::App* sub, FlagValues& f) {
  sub->add_option("--config", f.config, "key=value config file");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--B", f.B, "buffer size");
  sub->add_option("--M", f.M, "packets per arrival");
  sub->add_option("--C", f.C, "maximum service rate");
  sub->add_option("--alpha", f.alpha, "arrival probability");
  sub->add_option("--lambda", f.lambda, "power weight");
  sub->add_option("--sigma", f.sigma, "UCB bonus scale");
  sub->add_option("--delta", f.delta, "UCB confidence level");
  sub->add_option("--epsilon", f.epsilon, "exploration rate (baselines)");
  sub->add_option("--phi", f.phi, "step-size numerator");
  sub->add_option("--theta", f.theta, "step-size offset");
  sub->add_option("--ref-state", f.ref_state, "reference state");
  sub->add_option("--horizon", f.horizon, "number of simulated slots");
  sub->add_option("--seeds,--seed", f.seeds, "comma-separated seeds");
  sub->add_option("--agents,--agent", f.agents, "comma-separated agent kinds");
  sub->add_option("--lambdas", f.lambdas, "comma-separated lambda grid");
  sub->add_option("--alphas", f.alphas, "comma-separated alpha grid");
  sub->add_option("--max-policies", f.max_policies,
                  "tradeoff enumeration cap");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read config file " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Effective config: file keys (if --config given) overridden by any flag
/// that was explicitly passed. List-valued flags reuse the config parser so
/// their syntax and validation match the file format exactly.
RunConfig effective_config(CLI::App* sub, const FlagValues& f) {
  RunConfig cfg;
  if (sub->count("--config") > 0) {
    cfg = parse_config(read_file(f.config));
  }
  if (sub->count("--out") > 0) cfg.out = f.out;
  if (sub->count("--B") > 0) cfg.params.B = f.B;
  if (sub->count("--M") > 0) cfg.params.M = f.M;
  if (sub->count("--C") > 0) cfg.params.C = f.C;
  if (sub->count("--alpha") > 0) cfg.params.alpha = f.alpha;
  if (sub->count("--lambda") > 0) cfg.params.lambda = f.lambda;
  if (sub->count("--sigma") > 0) cfg.learner.sigma = f.sigma;
  if (sub->count("--delta") > 0) cfg.learner.delta = f.delta;
  if (sub->count("--epsilon") > 0) cfg.learner.epsilon = f.epsilon;
  if (sub->count("--phi") > 0) cfg.learner.phi = f.phi;
  if (sub->count("--theta") > 0) cfg.learner.theta = f.theta;
  if (sub->count("--ref-state") > 0) cfg.learner.ref_state = f.ref_state;
  if (sub->count("--horizon") > 0) cfg.horizon = f.horizon;
  if (sub->count("--max-policies") > 0) cfg.max_policies = f.max_policies;
  if (sub->count("--seeds") > 0) {
    cfg.seeds = parse_config("seeds = " + f.seeds).seeds;
  }
  if (sub->count("--agents") > 0) {
    cfg.agents = parse_config("agents = " + f.agents).agents;
  }
  if (sub->count("--lambdas") > 0) {
    cfg.lambdas = parse_config("lambdas = " + f.lambdas).lambdas;
  }
  if (sub->count("--alphas") > 0) {
    cfg.alphas = parse_config("alphas = " + f.alphas).alphas;
  }
  return cfg;
}

json seeds_json(const std::vector<std::uint64_t>& seeds) {
  json arr = json::array();
  for (const std::uint64_t s : seeds) arr.push_back(s);
  return arr;
}

/// Base metadata common to every command; `extra` adds per-command fields.
/// nlohmann::json keeps object keys sorted, so the sidecar is deterministic.
void write_run_meta(const RunConfig& cfg, const std::string& command,
                    const json& extra) {
  json meta;
  meta["command"] = command;
  meta["B"] = cfg.params.B;
  meta["M"] = cfg.params.M;
  meta["C"] = cfg.params.C;
  meta["alpha"] = cfg.params.alpha;
  meta["lambda"] = cfg.params.lambda;
  meta["sigma"] = cfg.learner.sigma;
  meta["delta"] = cfg.learner.delta;
  meta["epsilon"] = cfg.learner.epsilon;
  meta["phi"] = cfg.learner.phi;
  meta["theta"] = cfg.learner.theta;
  meta["ref_state"] = cfg.learner.ref_state;
  meta["horizon"] = cfg.horizon;
  meta["seeds"] = seeds_json(cfg.seeds);
  meta["agents"] = cfg.agents;
  meta["out"] = cfg.out;
  meta["lambdas"] = cfg.lambdas;
  meta["alphas"] = cfg.alphas;
  meta["max_policies"] = cfg.max_policies;
  meta["generator"] = std::string(Rng::kName);
  meta.update(extra);
  atomic_write_text(std::filesystem::path(cfg.out) / "run_meta.json",
                    meta.dump(2) + "\n");
}

void write_policy_csv(const std::filesystem::path& path,
                      const DeterministicPolicy& pi) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(pi.size());
  for (std::size_t s = 0; s < pi.size(); ++s) {
    rows.push_back({std::to_string(s), std::to_string(pi[s])});
  }
  write_csv(path, {"state", "action"}, rows);
}

std::string join_policy(const DeterministicPolicy& pi) {
  std::string out;
  for (std::size_t s = 0; s < pi.size(); ++s) {
    if (s > 0) out += ';';
    out += std::to_string(pi[s]);
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const RunMetrics& m) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.records.size());
  for (const MetricRecord& rec : m.records) {
    rows.push_back({std::to_string(rec.t), format_double(rec.cum_reward),
                    format_double(rec.avg_reward), format_double(rec.regret)});
  }
  write_csv(path, {"t", "cum_reward", "avg_reward", "regret"}, rows);
}

void write_qtable_csv(const std::filesystem::path& path, const QueueParams& p,
                      const QTables& tables) {
  std::vector<std::vector<std::string>> rows;
  for (int s = 0; s <= p.B; ++s) {
    const ActionRange range = feasible_range(p, s);
    for (int c = range.lo; c <= range.hi; ++c) {
      rows.push_back({std::to_string(s), std::to_string(c),
                      format_double(tables.Q(s, c)),
                      format_double(tables.Qhat(s, c)),
                      std::to_string(tables.N(s, c))});
    }
  }
  write_csv(path, {"state", "action", "Q", "Qhat", "N"}, rows);
}

int cmd_solve(const RunConfig& cfg) {
  require_valid(cfg.params);
  const auto model = build_transition_model<double>(cfg.params);
  const SolveResult<double> res =
      relative_value_iteration(model, cfg.learner.ref_state);
  std::printf("gain = %.6g\n", res.gain);
  write_policy_csv(std::filesystem::path(cfg.out) / "policy.csv", res.policy);
  json extra;
  extra["gain"] = res.gain;
  extra["iterations"] = res.iterations;
  extra["residual"] = res.residual;
  extra["policy"] = join_policy(res.policy);
  write_run_meta(cfg, "solve", extra);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require_valid(cfg.params);
  if (cfg.agents.size() != 1) {
    throw std::invalid_argument("train expects exactly one agent kind");
  }
  if (cfg.seeds.size() != 1) {
    throw std::invalid_argument("train expects exactly one seed");
  }
  const AgentKind kind = parse_agent_kind(cfg.agents.front());

  const auto model = build_transition_model<double>(cfg.params);
  const SolveResult<double> exact =
      relative_value_iteration(model, cfg.learner.ref_state);

  LearnerConfig lcfg = cfg.learner;
  lcfg.seed = cfg.seeds.front();
  RunOptions opts;
  opts.g_star = exact.gain;
  opts.reference_policy = exact.policy;
  const RunMetrics m = run_experiment(cfg.params, kind, lcfg, cfg.horizon, opts);

  const std::filesystem::path out(cfg.out);
  write_metrics_csv(out / "metrics.csv", m);
  const DeterministicPolicy learned = greedy_actions(m.final_tables, cfg.params);
  write_policy_csv(out / "policy.csv", learned);
  write_qtable_csv(out / "qtable.csv", cfg.params, m.final_tables);

  json extra;
  extra["agent"] = cfg.agents.front();
  extra["seed"] = cfg.seeds.front();
  extra["g_star"] = exact.gain;
  extra["exact_policy"] = join_policy(exact.policy);
  extra["learned_policy"] = join_policy(learned);
  extra["final_avg_reward"] = m.final_avg_reward;
  extra["final_regret"] = m.final_regret;
  extra["first_match_step"] = m.first_match_step;
  extra["dropped_total"] = m.dropped_total;
  write_run_meta(cfg, "train", extra);

  std::printf("agent = %s\n", cfg.agents.front().c_str());
  std::printf("final avg reward = %.6g\n", m.final_avg_reward);
  std::printf("final regret = %.6g\n", m.final_regret);
  return 0;
}

int cmd_tradeoff(const RunConfig& cfg) {
  require_valid(cfg.params);
  if (cfg.max_policies < 1) {
    throw std::invalid_argument("max_policies must be >= 1");
  }
  const std::uint64_t count = count_monotone_policies(cfg.params);
  if (count > static_cast<std::uint64_t>(cfg.max_policies)) {
    throw std::runtime_error(
        "monotone policy count " + std::to_string(count) +
        " exceeds the cap " + std::to_string(cfg.max_policies));
  }

  const auto model = build_transition_model<double>(cfg.params);
  const std::vector<DeterministicPolicy> policies =
      enumerate_monotone_policies(cfg.params);
  std::vector<TradeoffPoint<double>> points;
  points.reserve(policies.size());
  for (std::size_t id = 0; id < policies.size(); ++id) {
    const PolicyEval<double> eval = evaluate_policy(model, policies[id]);
    points.push_back({eval.D, eval.E, static_cast<std::int64_t>(id)});
  }
  const std::vector<TradeoffPoint<double>> frontier = tradeoff_frontier(points);
  std::set<std::int64_t> on_frontier;
  for (const auto& v : frontier) on_frontier.insert(v.policy_id);

  std::vector<TradeoffPoint<double>> sorted = points;
  std::sort(sorted.begin(), sorted.end(),
            [](const TradeoffPoint<double>& a, const TradeoffPoint<double>& b) {
              if (a.D != b.D) return a.D < b.D;
              if (a.E != b.E) return a.E < b.E;
              return a.policy_id < b.policy_id;
            });
  std::vector<std::vector<std::string>> rows;
  rows.reserve(sorted.size());
  for (const auto& pt : sorted) {
    rows.push_back({std::to_string(pt.policy_id), format_double(pt.D),
                    format_double(pt.E),
                    on_frontier.count(pt.policy_id) ? "1" : "0"});
  }
  write_csv(std::filesystem::path(cfg.out) / "tradeoff.csv",
            {"policy_id", "D", "E", "on_frontier"}, rows);

  json extra;
  extra["policy_count"] = count;
  extra["frontier_size"] = frontier.size();
  write_run_meta(cfg, "tradeoff", extra);
  std::printf("policies = %" PRIu64 "\n", count);
  std::printf("frontier = %zu\n", frontier.size());
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  require_valid(cfg.params);
  const bool lambda_mode = !cfg.lambdas.empty();
  const bool alpha_mode = !cfg.alphas.empty();
  if (lambda_mode && alpha_mode) {
    throw std::invalid_argument(
        "provide exactly one of lambdas or alphas, not both");
  }
  if (!lambda_mode && !alpha_mode) {
    throw std::invalid_argument("sweep needs a nonempty lambdas or alphas grid");
  }

  const std::vector<double>& grid = lambda_mode ? cfg.lambdas : cfg.alphas;
  const char* axis = lambda_mode ? "lambda" : "alpha";
  std::vector<std::vector<std::string>> rows;
  int failures = 0;
  const std::filesystem::path out(cfg.out);
  for (const double value : grid) {
    QueueParams p = cfg.params;
    (lambda_mode ? p.lambda : p.alpha) = value;
    try {
      require_valid(p);
      const auto model = build_transition_model<double>(p);
      const SolveResult<double> res =
          relative_value_iteration(model, cfg.learner.ref_state);
      const PolicyEval<double> eval = evaluate_policy(model, res.policy);
      rows.push_back({format_double(value), format_double(res.gain),
                      format_double(eval.D), format_double(eval.E),
                      join_policy(res.policy)});
      if (alpha_mode) {
        write_policy_csv(out / ("policy_alpha_" + format_double(value) + ".csv"),
                         res.policy);
      }
    } catch (const std::exception& e) {
      ++failures;
      std::fprintf(stderr, "sweep point %s=%s failed: %s\n", axis,
                   format_double(value).c_str(), e.what());
    }
  }
  write_csv(out / "sweep.csv", {axis, "gain", "D", "E", "policy"}, rows);

  json extra;
  extra["mode"] = axis;
  extra["grid"] = grid;
  extra["failures"] = failures;
  write_run_meta(cfg, "sweep", extra);
  std::printf("rows = %zu\n", rows.size());
  if (failures > 0) {
    std::fprintf(stderr, "%d sweep point(s) failed\n", failures);
    return 1;
  }
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  require_valid(cfg.params);
  if (cfg.agents.size() < 2) {
    throw std::invalid_argument("compare expects at least two agent kinds");
  }
  std::set<std::string> distinct(cfg.agents.begin(), cfg.agents.end());
  if (distinct.size() != cfg.agents.size()) {
    throw std::invalid_argument("compare agent kinds must be distinct");
  }
  if (cfg.seeds.empty()) {
    throw std::invalid_argument("compare expects at least one seed");
  }
  std::vector<AgentKind> kinds;
  kinds.reserve(cfg.agents.size());
  for (const std::string& name : cfg.agents) {
    kinds.push_back(parse_agent_kind(name));
  }

  const CompareResult cmp =
      multi_seed_compare(cfg.params, kinds, cfg.learner, cfg.horizon, cfg.seeds);

  const std::filesystem::path out(cfg.out);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(cmp.rows.size());
  for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
    const CompareRow& row = cmp.rows[i];
    const std::string agent = format_agent_kind(row.agent);
    rows.push_back({agent, std::to_string(row.seed),
                    format_double(row.final_avg_reward),
                    format_double(row.final_regret),
                    std::to_string(row.first_match_step)});
    write_metrics_csv(
        out / ("metrics_" + agent + "_" + std::to_string(row.seed) + ".csv"),
        cmp.runs[i]);
  }
  write_csv(out / "compare.csv",
            {"agent", "seed", "final_avg_reward", "final_regret",
             "first_match_step"},
            rows);

  json extra;
  extra["g_star"] = cmp.g_star;
  extra["exact_policy"] = join_policy(cmp.exact_policy);
  json aggs = json::array();
  for (const CompareAggregate& a : cmp.aggregates) {
    json j;
    j["agent"] = format_agent_kind(a.agent);
    j["mean_avg_reward"] = a.mean_avg_reward;
    j["min_avg_reward"] = a.min_avg_reward;
    j["max_avg_reward"] = a.max_avg_reward;
    j["mean_regret"] = a.mean_regret;
    j["min_regret"] = a.min_regret;
    j["max_regret"] = a.max_regret;
    j["matched_seeds"] = a.matched_seeds;
    aggs.push_back(j);
  }
  extra["aggregates"] = aggs;
  write_run_meta(cfg, "compare", extra);

  for (const CompareAggregate& a : cmp.aggregates) {
    std::printf("%s: mean final regret = %.6g\n",
                format_agent_kind(a.agent).c_str(), a.mean_regret);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-power queue scheduling: exact solver and learners"};
  app.require_subcommand(1);
  FlagValues f;
  CLI::App* solve =
      app.add_subcommand("solve", "exact average-reward solution");
  CLI::App* train = app.add_subcommand("train", "run one learning agent");
  CLI::App* tradeoff =
      app.add_subcommand("tradeoff", "delay-power frontier enumeration");
  CLI::App* sweep =
      app.add_subcommand("sweep", "re-solve across a lambda or alpha grid");
  CLI::App* compare =
      app.add_subcommand("compare", "multi-agent multi-seed comparison");
  for (CLI::App* sub : {solve, train, tradeoff, sweep, compare}) {
    add_shared_flags(sub, f);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig cfg = effective_config(sub, f);
    if (sub == solve) return cmd_solve(cfg);
    if (sub == train) return cmd_train(cfg);
    if (sub == tradeoff) return cmd_tradeoff(cfg);
    if (sub == sweep) return cmd_sweep(cfg);
    return cmd_compare(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
