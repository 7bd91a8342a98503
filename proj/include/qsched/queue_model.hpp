#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsched {

/// Environment constants of the single-queue single-server model plus the
/// Lagrangian trade-off weight. States are queue lengths q in {0..B}; actions
/// are per-slot transmission sizes c in {0..C}; arrivals are Bernoulli(alpha)
/// batches of M packets.
struct QueueParams {
  int B = 10;          ///< maximum buffer size in packets; must exceed M
  int M = 5;           ///< packets per arrival batch
  int C = 4;           ///< maximum packets transmitted per slot
  double alpha = 0.4;  ///< arrival probability per slot, in (0,1)
  double lambda = 1.0; ///< delay-power trade-off weight, >= 0

  int num_states() const { return B + 1; }
  int num_actions() const { return C + 1; }

  friend bool operator==(const QueueParams&, const QueueParams&) = default;
};

/// Returns every violated parameter constraint as a message; empty means ok.
inline std::vector<std::string> validate_params(const QueueParams& p) {
  std::vector<std::string> errors;
  if (p.B <= 0) errors.push_back("B must be a positive integer");
  if (p.M <= 0) errors.push_back("M must be a positive integer");
  if (p.C <= 0) errors.push_back("C must be a positive integer");
  if (p.B > 0 && p.M > 0 && p.B <= p.M) errors.push_back("B must exceed M");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) errors.push_back("alpha out of (0,1)");
  if (!(p.lambda >= 0.0)) errors.push_back("lambda must be >= 0");
  return errors;
}

/// Throws std::invalid_argument listing every violated constraint.
inline void require_valid(const QueueParams& p) {
  const auto errors = validate_params(p);
  if (errors.empty()) return;
  std::string msg = "invalid parameters: ";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) msg += "; ";
    msg += errors[i];
  }
  throw std::invalid_argument(msg);
}

/// Inclusive feasible-action interval for one state. The nominal bounds are
/// lo = max(0, q-B+M) and hi = min(q, C), which prevent both underflow and
/// buffer overflow. For q > B-M+C the interval is empty and the overflow
/// fallback applies: the only action is C (transmit at full capacity), the
/// next state clamps at B and dropped packets are counted.
struct ActionRange {
  int lo = 0;
  int hi = 0;
  bool fallback = false;

  bool contains(int c) const { return c >= lo && c <= hi; }
  int count() const { return hi - lo + 1; }
};

inline ActionRange feasible_range(const QueueParams& p, int q) {
  if (q < 0 || q > p.B) throw std::invalid_argument("state out of {0..B}");
  const int lo = std::max(0, q - p.B + p.M);
  const int hi = std::min(q, p.C);
  if (lo > hi) return ActionRange{p.C, p.C, true};
  return ActionRange{lo, hi, false};
}

/// Materialized, ascending feasible action set for one state.
inline std::vector<int> feasible_actions(const QueueParams& p, int q) {
  const ActionRange r = feasible_range(p, q);
  std::vector<int> actions;
  actions.reserve(static_cast<std::size_t>(r.count()));
  for (int c = r.lo; c <= r.hi; ++c) actions.push_back(c);
  return actions;
}

inline void require_feasible(const QueueParams& p, int q, int c) {
  if (!feasible_range(p, q).contains(c)) {
    throw std::invalid_argument("action " + std::to_string(c) +
                                " infeasible in state " + std::to_string(q));
  }
}

/// Deterministic one-slot transition given the arrival indicator tau.
struct Transition {
  int q_next = 0;
  int dropped = 0;
};

/// q' = min(q - c + M*tau, B); packets above B are dropped (only possible in
/// overflow-fallback states).
inline Transition next_state(const QueueParams& p, int q, int c, int tau) {
  require_feasible(p, q, c);
  if (tau != 0 && tau != 1) throw std::invalid_argument("tau must be 0 or 1");
  const int raw = q - c + p.M * tau;
  const int clamped = std::min(raw, p.B);
  return Transition{clamped, raw - clamped};
}

/// The two-point successor distribution {(q-c+M, alpha), (q-c, 1-alpha)},
/// with clamping at B and merging if both branches land on the same state.
inline std::vector<std::pair<int, double>> transition_distribution(
    const QueueParams& p, int q, int c) {
  require_feasible(p, q, c);
  const int up = std::min(q - c + p.M, p.B);
  const int down = q - c;  // c <= q always, so no underflow
  if (up == down) return {{down, 1.0}};
  return {{up, p.alpha}, {down, 1.0 - p.alpha}};
}

/// Immediate reward r(q, c) = -(q/(alpha*M) + lambda*c^2): negated weighted
/// sum of the Little's-law delay surrogate and the quadratic transmission
/// energy. Computed on the pre-transition state, independent of the arrival.
inline double immediate_reward(const QueueParams& p, int q, int c) {
  require_feasible(p, q, c);
  return -(static_cast<double>(q) / (p.alpha * p.M) +
           p.lambda * static_cast<double>(c) * static_cast<double>(c));
}

/// Dense tabular form of the MDP for the exact solver: one S x S kernel per
/// action, an S x A reward table (NaN marks infeasible cells; consumers mask
/// by `feasible` and never do arithmetic on the sentinel), and the per-state
/// feasible ranges.
template <typename Scalar = double>
struct TransitionModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  QueueParams params;
  std::vector<Matrix> kernel;  ///< kernel[a](s, s') = P(s' | s, a); zero rows for infeasible (s,a)
  Matrix rewards;              ///< rewards(s, a); NaN where a is infeasible in s
  std::vector<ActionRange> feasible;  ///< per-state action interval

  int num_states() const { return params.num_states(); }
  int num_actions() const { return params.num_actions(); }
};

template <typename Scalar = double>
TransitionModel<Scalar> build_transition_model(const QueueParams& p) {
  require_valid(p);
  using Matrix = typename TransitionModel<Scalar>::Matrix;
  const int S = p.num_states();
  const int A = p.num_actions();

  TransitionModel<Scalar> model;
  model.params = p;
  model.kernel.assign(static_cast<std::size_t>(A), Matrix::Zero(S, S));
  model.rewards =
      Matrix::Constant(S, A, std::numeric_limits<Scalar>::quiet_NaN());
  model.feasible.reserve(static_cast<std::size_t>(S));

  for (int q = 0; q < S; ++q) {
    const ActionRange range = feasible_range(p, q);
    model.feasible.push_back(range);
    for (int c = range.lo; c <= range.hi; ++c) {
      for (const auto& [next, prob] : transition_distribution(p, q, c)) {
        model.kernel[static_cast<std::size_t>(c)](q, next) +=
            static_cast<Scalar>(prob);
      }
      model.rewards(q, c) = static_cast<Scalar>(immediate_reward(p, q, c));
    }
  }
  return model;
}

}  // namespace qsched
