#include <qsched/learners.hpp>

#include <cmath>
#include <stdexcept>

namespace qsched {

double bonus(double sigma, double delta, int S, int A, std::int64_t k,
             std::int64_t t) {
  if (k < 1 || t < 1) {
    throw std::domain_error("bonus requires k >= 1 and t >= 1");
  }
  const double iota = std::log(static_cast<double>(S) * static_cast<double>(A) *
                               static_cast<double>(k) * static_cast<double>(t) /
                               delta);
  return sigma * std::sqrt(iota / static_cast<double>(k));
}

double step_size(double phi, double theta, std::int64_t k) {
  return phi / (static_cast<double>(k) + theta);
}

bool tables_equal(const QTables& a, const QTables& b) {
  return a.t == b.t && a.Q.rows() == b.Q.rows() && a.Q.cols() == b.Q.cols() &&
         (a.Q.array() == b.Q.array()).all() &&
         (a.Qhat.array() == b.Qhat.array()).all() &&
         (a.N.array() == b.N.array()).all();
}

AgentKind parse_agent_kind(const std::string& name) {
  if (name == "qgreedyucb") return AgentKind::kQGreedyUcb;
  if (name == "qlearning") return AgentKind::kQLearning;
  if (name == "arl") return AgentKind::kArl;
  throw std::invalid_argument(
      "unknown agent '" + name + "' (expected qgreedyucb, qlearning, or arl)");
}

std::string format_agent_kind(AgentKind kind) {
  switch (kind) {
    case AgentKind::kQGreedyUcb: return "qgreedyucb";
    case AgentKind::kQLearning: return "qlearning";
    case AgentKind::kArl: return "arl";
  }
  throw std::logic_error("unhandled AgentKind");
}

std::vector<int> argmax_actions(const Eigen::MatrixXd& table, int s,
                                const ActionRange& range) {
  double best = -std::numeric_limits<double>::infinity();
  for (int c = range.lo; c <= range.hi; ++c) best = std::max(best, table(s, c));
  std::vector<int> out;
  for (int c = range.lo; c <= range.hi; ++c) {
    if (table(s, c) == best) out.push_back(c);
  }
  return out;
}

StochasticPolicy extract_policy(const QTables& tables, const QueueParams& p) {
  require_valid(p);
  StochasticPolicy policy;
  policy.probs = Eigen::MatrixXd::Zero(p.num_states(), p.num_actions());
  for (int s = 0; s < p.num_states(); ++s) {
    const auto arg = argmax_actions(tables.Q, s, feasible_range(p, s));
    const double w = 1.0 / static_cast<double>(arg.size());
    for (int c : arg) policy.probs(s, c) = w;
  }
  return policy;
}

std::vector<int> greedy_actions(const QTables& tables, const QueueParams& p) {
  require_valid(p);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p.num_states()));
  for (int s = 0; s < p.num_states(); ++s) {
    out.push_back(argmax_actions(tables.Q, s, feasible_range(p, s)).front());
  }
  return out;
}

Agent::Agent(AgentKind kind, const QueueParams& params,
             const LearnerConfig& cfg)
    : kind_(kind), params_(params), cfg_(cfg), rng_(cfg.seed) {
  require_valid(params_);
  if (!(cfg_.sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(cfg_.delta > 0.0 && cfg_.delta < 1.0)) {
    throw std::invalid_argument("delta must be in (0,1)");
  }
  if (!(cfg_.epsilon >= 0.0 && cfg_.epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must be in [0,1]");
  }
  if (!(cfg_.phi > 0.0)) throw std::invalid_argument("phi must be > 0");
  if (!(cfg_.theta >= 0.0)) throw std::invalid_argument("theta must be >= 0");
  if (cfg_.ref_state < 0 || cfg_.ref_state > params_.B) {
    throw std::invalid_argument("ref_state out of {0..B}");
  }
  const int S = params_.num_states();
  const int A = params_.num_actions();
  feasible_.reserve(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) feasible_.push_back(feasible_range(params_, s));
  tables_.Q = Eigen::MatrixXd::Zero(S, A);
  tables_.Qhat = Eigen::MatrixXd::Zero(S, A);
  tables_.N.setZero(S, A);
}

double Agent::row_max(const Eigen::MatrixXd& table, int s) const {
  const ActionRange r = feasible_[static_cast<std::size_t>(s)];
  double best = -std::numeric_limits<double>::infinity();
  for (int c = r.lo; c <= r.hi; ++c) best = std::max(best, table(s, c));
  return best;
}

int Agent::argmax_select(const Eigen::MatrixXd& table, int s) {
  const ActionRange r = feasible_[static_cast<std::size_t>(s)];
  double best = -std::numeric_limits<double>::infinity();
  for (int c = r.lo; c <= r.hi; ++c) best = std::max(best, table(s, c));
  int ties[/* C+1 <= */ 64];
  int n = 0;
  for (int c = r.lo; c <= r.hi; ++c) {
    if (table(s, c) == best) ties[n++] = c;
  }
  // A singleton argmax consumes no randomness.
  return n == 1 ? ties[0] : ties[rng_.below(static_cast<std::uint64_t>(n))];
}

int Agent::uniform_feasible(int s) {
  const ActionRange r = feasible_[static_cast<std::size_t>(s)];
  return r.lo +
         static_cast<int>(rng_.below(static_cast<std::uint64_t>(r.count())));
}

int Agent::select(int s) {
  if (s < 0 || s > params_.B) throw std::invalid_argument("state out of {0..B}");
  switch (kind_) {
    case AgentKind::kQGreedyUcb:
      return argmax_select(tables_.Qhat, s);
    case AgentKind::kQLearning:
    case AgentKind::kArl:
      last_select_exploratory_ = rng_.uniform01() < cfg_.epsilon;
      return last_select_exploratory_ ? uniform_feasible(s)
                                      : argmax_select(tables_.Q, s);
  }
  throw std::logic_error("unhandled AgentKind");
}

void Agent::observe(int s, int a, double r, int s_next) {
  if (s < 0 || s > params_.B || s_next < 0 || s_next > params_.B) {
    throw std::invalid_argument("state out of {0..B}");
  }
  if (!feasible_[static_cast<std::size_t>(s)].contains(a)) {
    throw std::invalid_argument("action " + std::to_string(a) +
                                " infeasible in state " + std::to_string(s));
  }
  const std::int64_t k = ++tables_.N(s, a);
  const std::int64_t t = tables_.t + 1;  // step index of this update, from 1
  const double gamma = step_size(cfg_.phi, cfg_.theta, k);

  switch (kind_) {
    case AgentKind::kQGreedyUcb: {
      const double b = bonus(cfg_.sigma, cfg_.delta, params_.num_states(),
                             params_.num_actions(), k, t);
      const double target = r + row_max(tables_.Q, s_next) -
                            row_max(tables_.Q, cfg_.ref_state) + b;
      tables_.Q(s, a) = (1.0 - gamma) * tables_.Q(s, a) + gamma * target;
      tables_.Qhat(s, a) = std::min(tables_.Qhat(s, a), tables_.Q(s, a));
      break;
    }
    case AgentKind::kQLearning: {
      const double target = r + row_max(tables_.Q, s_next) -
                            row_max(tables_.Q, cfg_.ref_state);
      tables_.Q(s, a) = (1.0 - gamma) * tables_.Q(s, a) + gamma * target;
      break;
    }
    case AgentKind::kArl: {
      tables_.Q(s, a) +=
          gamma * (r - rho_ + row_max(tables_.Q, s_next) - tables_.Q(s, a));
      if (!last_select_exploratory_) {
        // Average-reward estimate from greedy steps only, after the Q write.
        const double beta = 1.0 / (static_cast<double>(greedy_steps_) + 1.0);
        rho_ += beta * (r + row_max(tables_.Q, s_next) -
                        row_max(tables_.Q, s) - rho_);
        ++greedy_steps_;
      }
      break;
    }
  }
  tables_.t = t;
}

}  // namespace qsched
