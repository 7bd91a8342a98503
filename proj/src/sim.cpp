#include <qsched/sim.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace qsched {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_horizon(std::int64_t T) {
  if (T < 1) {
    throw std::invalid_argument("horizon must be >= 1, got " +
                                std::to_string(T));
  }
}

void require_schedule(const std::vector<std::int64_t>& schedule,
                      std::int64_t T) {
  if (schedule.empty()) {
    throw std::invalid_argument("record schedule must be nonempty");
  }
  std::int64_t prev = 0;
  for (const std::int64_t t : schedule) {
    if (t <= prev || t > T) {
      throw std::invalid_argument(
          "record schedule must be strictly increasing within [1, horizon]");
    }
    prev = t;
  }
}

void require_policy_shape(const QueueParams& p, const DeterministicPolicy& pi) {
  if (static_cast<int>(pi.size()) != p.num_states()) {
    throw std::invalid_argument("policy must assign an action to every state");
  }
  for (int s = 0; s <= p.B; ++s) require_feasible(p, s, pi[static_cast<std::size_t>(s)]);
}

/// True iff for every state the exact Q-argmax set over feasible actions is
/// precisely the singleton {pi_ref[s]}.
bool policy_matches(const QTables& tables, const QueueParams& p,
                    const DeterministicPolicy& pi_ref) {
  for (int s = 0; s <= p.B; ++s) {
    const std::vector<int> amax =
        argmax_actions(tables.Q, s, feasible_range(p, s));
    if (amax.size() != 1 || amax.front() != pi_ref[s]) return false;
  }
  return true;
}

}  // namespace

EnvState make_env(std::uint64_t seed) {
  EnvState env;
  env.q = 0;
  env.rng = Rng(seed);
  env.t = 0;
  env.dropped_total = 0;
  return env;
}

StepResult env_step(EnvState& env, int a, const QueueParams& p) {
  require_feasible(p, env.q, a);
  const double reward = immediate_reward(p, env.q, a);
  const int tau = env.rng.bernoulli(p.alpha) ? 1 : 0;
  const Transition tr = next_state(p, env.q, a, tau);
  env.q = tr.q_next;
  env.t += 1;
  env.dropped_total += tr.dropped;
  return StepResult{reward, tau, tr.dropped, tr.q_next};
}

std::vector<std::int64_t> record_schedule(std::int64_t T, int max_points) {
  require_horizon(T);
  // 64-bit horizons force at most 21 mandatory points (1, powers of 10, T);
  // the floor keeps the size cap honest.
  if (max_points < 32) {
    throw std::invalid_argument("max_points must be >= 32");
  }
  std::vector<std::int64_t> out;
  if (T <= max_points) {
    out.resize(static_cast<std::size_t>(T));
    for (std::int64_t t = 1; t <= T; ++t) out[static_cast<std::size_t>(t - 1)] = t;
    return out;
  }
  // Reserve a few slots for the mandatory points (1, powers of 10, T): a
  // 64-bit horizon admits at most 19 powers of 10.
  const int grid = std::max(2, max_points - 20);
  const double logT = std::log(static_cast<double>(T));
  out.reserve(static_cast<std::size_t>(grid) + 21);
  for (int i = 0; i < grid; ++i) {
    const double x = std::exp(logT * static_cast<double>(i) /
                              static_cast<double>(grid - 1));
    const auto t = static_cast<std::int64_t>(std::llround(x));
    out.push_back(std::clamp<std::int64_t>(t, 1, T));
  }
  out.push_back(1);
  for (std::int64_t p10 = 10; p10 <= T / 10 * 10; p10 *= 10) {
    if (p10 <= T) out.push_back(p10);
    if (p10 > T / 10) break;  // next multiplication would overflow past T
  }
  out.push_back(T);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::pair<std::int64_t, double>> regret_series(
    const std::vector<std::pair<std::int64_t, double>>& cum_rewards,
    double g_star) {
  if (!std::isfinite(g_star)) {
    throw std::invalid_argument("g_star must be finite");
  }
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(cum_rewards.size());
  for (const auto& [t, cum] : cum_rewards) {
    if (t < 1) {
      throw std::invalid_argument("cumulative-reward steps must be >= 1");
    }
    const long double r = static_cast<long double>(t) * g_star -
                          static_cast<long double>(cum);
    out.emplace_back(t, static_cast<double>(r));
  }
  return out;
}

RunMetrics run_experiment(const QueueParams& p, AgentKind kind,
                          const LearnerConfig& cfg, std::int64_t T,
                          const RunOptions& opts) {
  require_valid(p);
  require_horizon(T);
  if (opts.g_star && !std::isfinite(*opts.g_star)) {
    throw std::invalid_argument("g_star must be finite");
  }
  if (opts.reference_policy) {
    require_policy_shape(p, *opts.reference_policy);
  }
  const std::vector<std::int64_t> schedule =
      opts.schedule ? *opts.schedule : record_schedule(T);
  require_schedule(schedule, T);

  LearnerConfig agent_cfg = cfg;
  agent_cfg.seed = derive_stream_seed(cfg.seed, 1);
  Agent agent(kind, p, agent_cfg);
  EnvState env = make_env(derive_stream_seed(cfg.seed, 0));

  RunMetrics m;
  m.horizon = T;
  m.seed = cfg.seed;
  m.has_regret = opts.g_star.has_value();
  m.records.reserve(schedule.size());

  long double cum = 0;
  std::size_t next_rec = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    const int s = env.q;
    const int a = agent.select(s);
    const StepResult step = env_step(env, a, p);
    agent.observe(s, a, step.reward, step.q_next);
    cum += step.reward;
    if (next_rec < schedule.size() && schedule[next_rec] == t) {
      MetricRecord rec;
      rec.t = t;
      rec.cum_reward = static_cast<double>(cum);
      rec.avg_reward = static_cast<double>(cum / static_cast<long double>(t));
      rec.regret = m.has_regret
                       ? static_cast<double>(
                             static_cast<long double>(t) * *opts.g_star - cum)
                       : kNaN;
      m.records.push_back(rec);
      if (opts.reference_policy && m.first_match_step < 0 &&
          policy_matches(agent.tables(), p, *opts.reference_policy)) {
        m.first_match_step = t;
      }
      ++next_rec;
    }
  }

  m.final_policy = extract_policy(agent.tables(), p);
  m.final_tables = agent.tables();
  m.dropped_total = env.dropped_total;
  m.final_avg_reward = static_cast<double>(cum / static_cast<long double>(T));
  m.final_regret = m.has_regret
                       ? static_cast<double>(
                             static_cast<long double>(T) * *opts.g_star - cum)
                       : kNaN;
  return m;
}

PolicyMc simulate_policy(const QueueParams& p, const DeterministicPolicy& pi,
                         std::int64_t T, std::uint64_t seed) {
  require_valid(p);
  require_horizon(T);
  require_policy_shape(p, pi);
  EnvState env = make_env(derive_stream_seed(seed, 0));
  long double cum_r = 0, cum_q = 0, cum_c2 = 0;
  for (std::int64_t t = 1; t <= T; ++t) {
    const int c = pi[static_cast<std::size_t>(env.q)];
    cum_q += env.q;
    cum_c2 += static_cast<long double>(c) * c;
    cum_r += env_step(env, c, p).reward;
  }
  const auto n = static_cast<long double>(T);
  PolicyMc mc;
  mc.avg_reward = static_cast<double>(cum_r / n);
  mc.D = static_cast<double>(cum_q / n / (p.alpha * p.M));
  mc.E = static_cast<double>(cum_c2 / n);
  mc.dropped_total = env.dropped_total;
  return mc;
}

CompareResult multi_seed_compare(const QueueParams& p,
                                 const std::vector<AgentKind>& kinds,
                                 const LearnerConfig& cfg, std::int64_t T,
                                 const std::vector<std::uint64_t>& seeds) {
  require_valid(p);
  require_horizon(T);
  if (kinds.empty()) throw std::invalid_argument("need at least one agent kind");
  if (seeds.empty()) throw std::invalid_argument("need at least one seed");

  const auto model = build_transition_model<double>(p);
  const SolveResult<double> exact = relative_value_iteration(model);

  CompareResult out;
  out.g_star = exact.gain;
  out.exact_policy = exact.policy;
  out.rows.reserve(kinds.size() * seeds.size());
  out.aggregates.reserve(kinds.size());

  RunOptions opts;
  opts.g_star = exact.gain;
  opts.reference_policy = exact.policy;
  opts.schedule = record_schedule(T);

  for (const AgentKind kind : kinds) {
    CompareAggregate agg;
    agg.agent = kind;
    agg.min_avg_reward = std::numeric_limits<double>::infinity();
    agg.max_avg_reward = -std::numeric_limits<double>::infinity();
    agg.min_regret = std::numeric_limits<double>::infinity();
    agg.max_regret = -std::numeric_limits<double>::infinity();
    long double sum_avg = 0, sum_regret = 0;
    for (const std::uint64_t seed : seeds) {
      LearnerConfig run_cfg = cfg;
      run_cfg.seed = seed;
      const RunMetrics m = run_experiment(p, kind, run_cfg, T, opts);
      CompareRow row;
      row.agent = kind;
      row.seed = seed;
      row.final_avg_reward = m.final_avg_reward;
      row.final_regret = m.final_regret;
      row.first_match_step = m.first_match_step;
      out.rows.push_back(row);
      out.runs.push_back(m);
      sum_avg += m.final_avg_reward;
      sum_regret += m.final_regret;
      agg.min_avg_reward = std::min(agg.min_avg_reward, m.final_avg_reward);
      agg.max_avg_reward = std::max(agg.max_avg_reward, m.final_avg_reward);
      agg.min_regret = std::min(agg.min_regret, m.final_regret);
      agg.max_regret = std::max(agg.max_regret, m.final_regret);
      if (m.first_match_step >= 0) ++agg.matched_seeds;
    }
    const auto n = static_cast<long double>(seeds.size());
    agg.mean_avg_reward = static_cast<double>(sum_avg / n);
    agg.mean_regret = static_cast<double>(sum_regret / n);
    out.aggregates.push_back(agg);
  }
  return out;
}

std::vector<AlphaEntry> alpha_sweep(QueueParams base,
                                    const std::vector<double>& alphas,
                                    AgentKind kind, const LearnerConfig& cfg,
                                    std::int64_t T) {
  require_horizon(T);
  if (alphas.empty()) throw std::invalid_argument("need at least one alpha");
  std::vector<AlphaEntry> out;
  out.reserve(alphas.size());
  for (const double alpha : alphas) {
    QueueParams p = base;
    p.alpha = alpha;
    require_valid(p);
    const auto model = build_transition_model<double>(p);
    const SolveResult<double> exact = relative_value_iteration(model);

    RunOptions opts;
    opts.g_star = exact.gain;
    opts.reference_policy = exact.policy;

    AlphaEntry e;
    e.alpha = alpha;
    e.exact_gain = exact.gain;
    e.exact_policy = exact.policy;
    e.metrics = run_experiment(p, kind, cfg, T, opts);
    e.learned_policy = greedy_actions(e.metrics.final_tables, p);
    e.learned_matches_exact =
        policy_matches(e.metrics.final_tables, p, exact.policy);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace qsched
