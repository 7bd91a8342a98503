#pragma once

#include <qsched/queue_model.hpp>
#include <qsched/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace qsched {

/// Hyperparameters shared by the tabular agents. Defaults are the reference
/// runs' values. epsilon drives the two epsilon-greedy baselines only; the
/// UCB agent's selection is pure argmax and ignores it.
struct LearnerConfig {
  double sigma = 1.0;    ///< exploration bonus scale, > 0
  double delta = 0.01;   ///< confidence parameter, in (0,1)
  double epsilon = 0.01; ///< exploration probability, in [0,1]
  double phi = 1.0;      ///< step-size numerator, > 0
  double theta = 1.0;    ///< step-size offset, >= 0
  int ref_state = 0;     ///< reference state i for the relative update
  std::uint64_t seed = 1;

  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

/// Confidence bonus b_k = sigma * sqrt(iota/k) with iota = ln(S*A*k*t/delta).
/// Throws std::domain_error unless k >= 1 and t >= 1.
double bonus(double sigma, double delta, int S, int A, std::int64_t k,
             std::int64_t t);

/// Tapering step size gamma_k = phi/(k + theta); k is the post-increment
/// visit count, so k >= 1.
double step_size(double phi, double theta, std::int64_t k);

/// The agent's learned tables. Infeasible (s,a) cells stay at their initial
/// zeros and are never selected, updated, or exported.
struct QTables {
  Eigen::MatrixXd Q;     ///< value estimates, (B+1) x (C+1)
  Eigen::MatrixXd Qhat;  ///< per-cell historical minimum of Q
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> N;  ///< visits
  std::int64_t t = 0;    ///< completed update count
};

/// Bitwise equality of two table sets (exact float comparison).
bool tables_equal(const QTables& a, const QTables& b);

/// Per-state probability rows over actions; support within feasible sets.
struct StochasticPolicy {
  Eigen::MatrixXd probs;  ///< (B+1) x (C+1), each row sums to 1
};

enum class AgentKind { kQGreedyUcb, kQLearning, kArl };

/// Parses "qgreedyucb" | "qlearning" | "arl"; throws std::invalid_argument
/// on anything else.
AgentKind parse_agent_kind(const std::string& name);
std::string format_agent_kind(AgentKind kind);

/// Ascending set of actions within `range` attaining the row maximum of
/// `table` at state `s` (exact float comparison).
std::vector<int> argmax_actions(const Eigen::MatrixXd& table, int s,
                                const ActionRange& range);

/// Uniform distribution over the argmax of Q (not Qhat) per state,
/// restricted to feasible actions.
StochasticPolicy extract_policy(const QTables& tables, const QueueParams& p);

/// Deterministic single-action reduction of extract_policy: the smallest
/// Q-argmax per state (used for diffable policy exports).
std::vector<int> greedy_actions(const QTables& tables, const QueueParams& p);

/// One tabular agent: select(s) returns an action for the current state,
/// observe(s,a,r,s_next) applies the agent's update. The three kinds share
/// the select/observe interface, the step-size schedule, and the
/// feasibility masking:
///  - kQGreedyUcb: selects argmax of Qhat; relative Q-update with the
///    confidence bonus; Qhat tracks the per-cell historical minimum of Q.
///  - kQLearning: epsilon-greedy over Q; the same relative update with zero
///    bonus and no Qhat tracking.
///  - kArl: epsilon-greedy over Q; relative update against a learned scalar
///    average reward rho, which is re-estimated on non-exploratory steps
///    only (a documented reconstruction of the cited baseline).
/// A single instance is single-threaded; select/observe alternate.
class Agent {
 public:
  Agent(AgentKind kind, const QueueParams& params, const LearnerConfig& cfg);

  /// Chooses an action for state s (ties broken uniformly via the agent's
  /// RNG stream; the epsilon-coin, when the kind uses one, is drawn first).
  int select(int s);

  /// Updates the tables from one transition. `a` must be feasible in `s`.
  void observe(int s, int a, double r, int s_next);

  const QTables& tables() const { return tables_; }
  AgentKind kind() const { return kind_; }
  const QueueParams& params() const { return params_; }
  const LearnerConfig& config() const { return cfg_; }
  double rho() const { return rho_; }  ///< ARL's average-reward estimate

 private:
  double row_max(const Eigen::MatrixXd& table, int s) const;
  int argmax_select(const Eigen::MatrixXd& table, int s);
  int uniform_feasible(int s);

  AgentKind kind_;
  QueueParams params_;
  LearnerConfig cfg_;
  std::vector<ActionRange> feasible_;
  QTables tables_;
  Rng rng_;
  bool last_select_exploratory_ = false;
  double rho_ = 0.0;
  std::int64_t greedy_steps_ = 0;
};

}  // namespace qsched
