#pragma once

#include <qsched/exact.hpp>
#include <qsched/learners.hpp>
#include <qsched/queue_model.hpp>
#include <qsched/rng.hpp>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace qsched {

/// Mutable state of one simulated queue: current length, the environment's
/// own RNG stream, the slot index, and the cumulative packet-drop count.
struct EnvState {
  int q = 0;
  Rng rng;
  std::int64_t t = 0;
  std::int64_t dropped_total = 0;
};

/// Fresh environment: empty queue, slot 0, stream seeded with `seed`.
EnvState make_env(std::uint64_t seed);

struct StepResult {
  double reward = 0;  ///< immediate_reward(q, a) of the pre-transition state
  int tau = 0;        ///< arrival indicator drawn this slot
  int dropped = 0;    ///< packets dropped this slot (fallback states only)
  int q_next = 0;
};

/// Advances the queue one slot under action `a`: draws the arrival from the
/// environment stream, pays the pre-transition reward (independent of the
/// arrival), and applies the queue update. Throws on infeasible actions.
StepResult env_step(EnvState& env, int a, const QueueParams& p);

/// Deterministic logarithmically spaced recording schedule: ascending,
/// duplicate-free, at most `max_points` entries, always containing 1, the
/// powers of 10 up to T, and T itself. Horizons at most `max_points` are
/// recorded densely.
std::vector<std::int64_t> record_schedule(std::int64_t T, int max_points = 2000);

/// regret(t) = t*g_star - (cumulative reward at t) for each prefix-sum pair.
std::vector<std::pair<std::int64_t, double>> regret_series(
    const std::vector<std::pair<std::int64_t, double>>& cum_rewards,
    double g_star);

struct MetricRecord {
  std::int64_t t = 0;
  double cum_reward = 0;
  double avg_reward = 0;
  double regret = 0;  ///< NaN when the run had no reference gain
};

/// Everything measured in one training run. visit histogram = final_tables.N.
struct RunMetrics {
  std::int64_t horizon = 0;
  std::uint64_t seed = 0;  ///< the run's master seed
  bool has_regret = false;
  std::vector<MetricRecord> records;
  StochasticPolicy final_policy;
  QTables final_tables;
  /// First recorded step whose extracted policy equals the reference policy
  /// (every per-state Q-argmax set is exactly the reference action); -1 if
  /// never, or if no reference policy was supplied.
  std::int64_t first_match_step = -1;
  std::int64_t dropped_total = 0;
  double final_avg_reward = 0;
  double final_regret = 0;  ///< NaN when the run had no reference gain
};

struct RunOptions {
  std::optional<double> g_star;  ///< exact gain; enables the regret column
  std::optional<std::vector<std::int64_t>> schedule;  ///< default: record_schedule(T)
  std::optional<DeterministicPolicy> reference_policy;  ///< enables match tracking
};

/// Runs one agent for T slots from an empty queue, alternating
/// select/observe. The master seed cfg.seed spawns two documented substreams
/// (environment = stream 0, agent = stream 1), so one seed reproduces the
/// whole run bit-for-bit.
RunMetrics run_experiment(const QueueParams& p, AgentKind kind,
                          const LearnerConfig& cfg, std::int64_t T,
                          const RunOptions& opts = {});

/// Long-run Monte-Carlo statistics of a fixed deterministic policy, using
/// the same environment substream convention as run_experiment.
struct PolicyMc {
  double avg_reward = 0;
  double D = 0;  ///< empirical mean of q/(alpha M)
  double E = 0;  ///< empirical mean of c^2
  std::int64_t dropped_total = 0;
};
PolicyMc simulate_policy(const QueueParams& p, const DeterministicPolicy& pi,
                         std::int64_t T, std::uint64_t seed);

struct CompareRow {
  AgentKind agent;
  std::uint64_t seed = 0;
  double final_avg_reward = 0;
  double final_regret = 0;
  std::int64_t first_match_step = -1;
};

struct CompareAggregate {
  AgentKind agent;
  double mean_avg_reward = 0, min_avg_reward = 0, max_avg_reward = 0;
  double mean_regret = 0, min_regret = 0, max_regret = 0;
  int matched_seeds = 0;  ///< seeds whose policy matched within the horizon
};

struct CompareResult {
  std::vector<CompareRow> rows;  ///< one per (agent, seed), in input order
  std::vector<RunMetrics> runs;  ///< full metrics, aligned with rows
  std::vector<CompareAggregate> aggregates;  ///< one per agent, input order
  double g_star = 0;
  DeterministicPolicy exact_policy;
};

/// Runs every (agent kind, seed) pair at horizon T and summarizes final
/// average reward, final regret, and the first recorded policy-match step
/// against the exact solver's policy. Deterministic given the seed list.
CompareResult multi_seed_compare(const QueueParams& p,
                                 const std::vector<AgentKind>& kinds,
                                 const LearnerConfig& cfg, std::int64_t T,
                                 const std::vector<std::uint64_t>& seeds);

struct AlphaEntry {
  double alpha = 0;
  double exact_gain = 0;
  DeterministicPolicy exact_policy;
  DeterministicPolicy learned_policy;  ///< smallest Q-argmax per state
  bool learned_matches_exact = false;  ///< argmax-set equality on all states
  RunMetrics metrics;
};

/// Re-solves and re-trains per arrival rate; entries ordered as `alphas`.
std::vector<AlphaEntry> alpha_sweep(QueueParams base,
                                    const std::vector<double>& alphas,
                                    AgentKind kind, const LearnerConfig& cfg,
                                    std::int64_t T);

}  // namespace qsched
