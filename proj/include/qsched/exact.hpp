#pragma once

#include <qsched/queue_model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsched {

/// One feasible action per state, indexed by queue length.
using DeterministicPolicy = std::vector<int>;

template <typename Scalar = double>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Output of relative value iteration: optimal gain, bias (relative value)
/// vector normalized to bias[ref_state] = 0, the extracted policy, and the
/// iteration count / final span residual of the stopping rule.
template <typename Scalar = double>
struct SolveResult {
  Scalar gain = 0;
  VectorX<Scalar> bias;
  DeterministicPolicy policy;
  std::int64_t iterations = 0;
  Scalar residual = 0;
};

/// Exact long-run statistics of a fixed policy: stationary distribution of
/// the chain started at q=0 (zeros at states it never reaches), average
/// delay D (slots), average power E (energy/slot), and gain = -(D + lambda E).
template <typename Scalar = double>
struct PolicyEval {
  VectorX<Scalar> stationary;
  Scalar D = 0;
  Scalar E = 0;
  Scalar gain = 0;
};

template <typename Scalar = double>
struct TradeoffPoint {
  Scalar D = 0;
  Scalar E = 0;
  std::int64_t policy_id = -1;
};

template <typename Scalar = double>
struct SweepEntry {
  Scalar lambda = 0;
  SolveResult<Scalar> solve;
  PolicyEval<Scalar> eval;
};

/// Time-sharing mixture over frontier policies attaining a power budget.
template <typename Scalar = double>
struct Mixture {
  std::vector<std::pair<std::int64_t, Scalar>> weights;  ///< (policy_id, weight)
  Scalar D = 0;
  Scalar E = 0;
};

namespace detail {

template <typename Scalar>
void require_policy_feasible(const TransitionModel<Scalar>& model,
                             const DeterministicPolicy& pi) {
  const int S = model.num_states();
  if (static_cast<int>(pi.size()) != S) {
    throw std::invalid_argument("policy must assign one action to each of " +
                                std::to_string(S) + " states");
  }
  for (int q = 0; q < S; ++q) {
    if (!model.feasible[q].contains(pi[q])) {
      throw std::invalid_argument("infeasible policy: action " +
                                  std::to_string(pi[q]) + " in state " +
                                  std::to_string(q));
    }
  }
}

}  // namespace detail

/// Row-stochastic chain of the policy: row s is transition_distribution(s, pi(s)).
template <typename Scalar>
MatrixX<Scalar> policy_chain(const TransitionModel<Scalar>& model,
                             const DeterministicPolicy& pi) {
  detail::require_policy_feasible(model, pi);
  const int S = model.num_states();
  MatrixX<Scalar> chain(S, S);
  for (int q = 0; q < S; ++q) chain.row(q) = model.kernel[pi[q]].row(q);
  return chain;
}

/// States reachable from `start` along positive-probability transitions,
/// ascending. Accepts any Eigen matrix expression.
template <typename Derived>
std::vector<int> reachable_from(const Eigen::MatrixBase<Derived>& chain_in,
                                int start) {
  using Scalar = typename Derived::Scalar;
  const auto& chain = chain_in.derived();
  const int S = static_cast<int>(chain.rows());
  if (start < 0 || start >= S) throw std::invalid_argument("start state out of range");
  std::vector<char> seen(static_cast<std::size_t>(S), 0);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int t = 0; t < S; ++t) {
      if (chain(s, t) > Scalar(0) && !seen[static_cast<std::size_t>(t)]) {
        seen[static_cast<std::size_t>(t)] = 1;
        stack.push_back(t);
      }
    }
  }
  std::vector<int> out;
  for (int s = 0; s < S; ++s) {
    if (seen[static_cast<std::size_t>(s)]) out.push_back(s);
  }
  return out;
}

/// Stationary distribution of the chain's long-run behavior started at q=0:
/// solves pi P = pi, sum(pi) = 1 restricted to the states reachable from 0,
/// returned as a full-length vector (zeros at unreached states). Throws if
/// the restricted chain does not have a unique stationary distribution (the
/// linear system is then singular) or the solve degrades numerically.
/// Accepts any Eigen matrix expression.
template <typename Derived>
VectorX<typename Derived::Scalar> stationary_distribution(
    const Eigen::MatrixBase<Derived>& chain_in) {
  using Scalar = typename Derived::Scalar;
  const auto& chain = chain_in.derived();
  const int S = static_cast<int>(chain.rows());
  if (chain.cols() != S || S == 0) {
    throw std::invalid_argument("chain must be square and non-empty");
  }
  for (int s = 0; s < S; ++s) {
    if (std::abs(chain.row(s).sum() - Scalar(1)) > Scalar(1e-9) ||
        (chain.row(s).array() < Scalar(0)).any()) {
      throw std::invalid_argument("chain is not row-stochastic at row " +
                                  std::to_string(s));
    }
  }

  const std::vector<int> reach = reachable_from(chain, 0);
  const int n = static_cast<int>(reach.size());

  // Restriction to the reachable set (which is closed by construction).
  MatrixX<Scalar> P(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) P(i, j) = chain(reach[i], reach[j]);
  }

  // pi (P - I) = 0 has a one-dimensional solution space iff the restricted
  // chain has a single recurrent class; otherwise the problem is singular.
  MatrixX<Scalar> A = P.transpose() - MatrixX<Scalar>::Identity(n, n);
  Eigen::FullPivLU<MatrixX<Scalar>> lu(A);
  lu.setThreshold(Scalar(1e-9));
  if (lu.rank() < n - 1) {
    throw std::runtime_error(
        "stationary distribution solve is singular: the chain restricted to "
        "states reachable from 0 has no unique stationary distribution");
  }

  // Bordered least-squares system: stationarity rows plus the normalization.
  MatrixX<Scalar> B(n + 1, n);
  B.topRows(n) = A;
  B.row(n).setOnes();
  VectorX<Scalar> b = VectorX<Scalar>::Zero(n + 1);
  b(n) = Scalar(1);
  VectorX<Scalar> pi_r = B.colPivHouseholderQr().solve(b);

  if ((B * pi_r - b).template lpNorm<Eigen::Infinity>() > Scalar(1e-9)) {
    throw std::runtime_error(
        "stationary distribution solve failed: residual above tolerance");
  }

  // Clamp solver jitter, renormalize exactly, and re-embed.
  pi_r = pi_r.cwiseMax(Scalar(0));
  pi_r /= pi_r.sum();
  VectorX<Scalar> pi = VectorX<Scalar>::Zero(S);
  for (int i = 0; i < n; ++i) pi(reach[i]) = pi_r(i);
  return pi;
}

/// Exact (D, E, gain) of a policy under its stationary distribution from q=0.
template <typename Scalar>
PolicyEval<Scalar> evaluate_policy(const TransitionModel<Scalar>& model,
                                   const DeterministicPolicy& pi) {
  const MatrixX<Scalar> chain = policy_chain(model, pi);
  PolicyEval<Scalar> eval;
  eval.stationary = stationary_distribution(chain);
  const QueueParams& p = model.params;
  for (int q = 0; q < model.num_states(); ++q) {
    const Scalar w = eval.stationary(q);
    eval.D += w * Scalar(q) / Scalar(p.alpha * p.M);
    eval.E += w * Scalar(pi[q]) * Scalar(pi[q]);
  }
  eval.gain = -(eval.D + Scalar(p.lambda) * eval.E);
  return eval;
}

/// Greedy policy with respect to a bias vector h: per state, the action
/// maximizing R(s,a) + sum_s' P(s'|s,a) h(s'), taking the smallest action on
/// ties within a 1e-9 relative tolerance (documented tie rule).
template <typename Scalar>
DeterministicPolicy greedy_policy(const TransitionModel<Scalar>& model,
                                  const VectorX<Scalar>& h) {
  const int S = model.num_states();
  const int A = model.num_actions();
  std::vector<VectorX<Scalar>> val(static_cast<std::size_t>(A));
  for (int c = 0; c < A; ++c) {
    val[c] = model.rewards.col(c) + model.kernel[c] * h;
  }
  DeterministicPolicy pi(static_cast<std::size_t>(S), 0);
  for (int q = 0; q < S; ++q) {
    const ActionRange r = model.feasible[q];
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (int c = r.lo; c <= r.hi; ++c) best = std::max(best, val[c](q));
    const Scalar slack = Scalar(1e-9) * std::max(Scalar(1), std::abs(best));
    for (int c = r.lo; c <= r.hi; ++c) {
      if (best - val[c](q) <= slack) {
        pi[q] = c;
        break;
      }
    }
  }
  return pi;
}

namespace detail {

/// Rewrites actions at states the chain never visits from q=0 so the policy
/// is nondecreasing there (ascending scan; smallest feasible action >= the
/// previous state's choice). Visited states keep their greedy action, so the
/// induced chain from q=0 — hence gain, D, and E — is unchanged. Returns the
/// untouched greedy policy if no such completion exists.
template <typename Scalar>
DeterministicPolicy monotone_completion(const TransitionModel<Scalar>& model,
                                        const DeterministicPolicy& greedy) {
  const std::vector<int> reach =
      reachable_from(policy_chain(model, greedy), 0);
  std::vector<char> reachable(greedy.size(), 0);
  for (int s : reach) reachable[static_cast<std::size_t>(s)] = 1;

  DeterministicPolicy pi = greedy;
  int prev = 0;
  for (int q = 0; q < model.num_states(); ++q) {
    if (!reachable[static_cast<std::size_t>(q)]) {
      const ActionRange r = model.feasible[q];
      const int c = std::max(r.lo, prev);
      if (c > r.hi) return greedy;  // no completion; keep the greedy policy
      pi[q] = c;
    }
    prev = pi[q];
  }
  return pi;
}

}  // namespace detail

/// Relative value iteration for the optimal average reward (gain).
///
/// Iterates h <- T h - (T h)(ref_state) with (T h)(s) = max over feasible a of
/// R(s,a) + sum_s' P(s'|s,a) h(s'), stopping when the span seminorm of the
/// successive difference T h - h falls to `tol` (the model is unichain, so the
/// gain is unique and lies within that span). Returns the gain, the bias
/// normalized to bias[ref_state] = 0, and the greedy policy, post-processed
/// to be nondecreasing at states the optimal chain never visits from q=0
/// (dispatch there is otherwise arbitrary; see detail::monotone_completion).
template <typename Scalar>
SolveResult<Scalar> relative_value_iteration(
    const TransitionModel<Scalar>& model, int ref_state = 0,
    Scalar tol = Scalar(1e-10), std::int64_t max_iter = 1000000) {
  const int S = model.num_states();
  const int A = model.num_actions();
  if (ref_state < 0 || ref_state >= S) {
    throw std::invalid_argument("ref_state out of {0..B}");
  }
  if (!(tol > Scalar(0))) throw std::invalid_argument("tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  VectorX<Scalar> h = VectorX<Scalar>::Zero(S);
  VectorX<Scalar> Th(S);
  std::vector<VectorX<Scalar>> val(static_cast<std::size_t>(A));

  SolveResult<Scalar> result;
  result.residual = std::numeric_limits<Scalar>::infinity();
  for (result.iterations = 1; result.iterations <= max_iter;
       ++result.iterations) {
    for (int c = 0; c < A; ++c) {
      val[static_cast<std::size_t>(c)] =
          model.rewards.col(c) + model.kernel[c] * h;
    }
    for (int q = 0; q < S; ++q) {
      const ActionRange r = model.feasible[q];
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (int c = r.lo; c <= r.hi; ++c) {
        best = std::max(best, val[static_cast<std::size_t>(c)](q));
      }
      Th(q) = best;
    }
    const VectorX<Scalar> diff = Th - h;
    result.residual = diff.maxCoeff() - diff.minCoeff();
    result.gain = Th(ref_state) - h(ref_state);
    h = (Th.array() - Th(ref_state)).matrix();  // gauge: h(ref_state) = 0
    if (result.residual <= tol) break;
  }
  if (result.residual > tol) {
    throw std::runtime_error(
        "relative value iteration did not converge: span residual " +
        std::to_string(static_cast<double>(result.residual)) + " > tol after " +
        std::to_string(max_iter) + " iterations");
  }

  result.bias = h;
  result.policy = detail::monotone_completion(model, greedy_policy(model, h));
  return result;
}

/// All feasible deterministic policies with c(q) nondecreasing in q, in
/// lexicographic order of the action vector.
inline std::vector<DeterministicPolicy> enumerate_monotone_policies(
    const QueueParams& p) {
  require_valid(p);
  const int S = p.num_states();
  std::vector<ActionRange> ranges;
  ranges.reserve(static_cast<std::size_t>(S));
  for (int q = 0; q < S; ++q) ranges.push_back(feasible_range(p, q));

  std::vector<DeterministicPolicy> out;
  DeterministicPolicy current(static_cast<std::size_t>(S), 0);
  // Depth-first over states with ascending action choices yields
  // lexicographic order directly.
  auto rec = [&](auto&& self, int q, int prev) -> void {
    if (q == S) {
      out.push_back(current);
      return;
    }
    const ActionRange r = ranges[static_cast<std::size_t>(q)];
    for (int c = std::max(r.lo, prev); c <= r.hi; ++c) {
      current[static_cast<std::size_t>(q)] = c;
      self(self, q + 1, c);
    }
  };
  rec(rec, 0, 0);
  return out;
}

/// Saturating count of monotone feasible policies (cheap DP; use before
/// enumerate_monotone_policies to enforce an enumeration cap).
inline std::uint64_t count_monotone_policies(const QueueParams& p) {
  require_valid(p);
  constexpr std::uint64_t kCap = 1000000000000000000ULL;  // 1e18, saturated
  const int A = p.num_actions();
  std::vector<std::uint64_t> count(static_cast<std::size_t>(A), 0);
  const ActionRange r0 = feasible_range(p, 0);
  for (int c = r0.lo; c <= r0.hi; ++c) count[static_cast<std::size_t>(c)] = 1;
  for (int q = 1; q < p.num_states(); ++q) {
    const ActionRange r = feasible_range(p, q);
    std::vector<std::uint64_t> next(static_cast<std::size_t>(A), 0);
    std::uint64_t prefix = 0;
    for (int c = 0; c < A; ++c) {
      prefix = std::min(kCap, prefix + count[static_cast<std::size_t>(c)]);
      if (r.contains(c)) next[static_cast<std::size_t>(c)] = prefix;
    }
    count = std::move(next);
  }
  std::uint64_t total = 0;
  for (std::uint64_t v : count) total = std::min(kCap, total + v);
  return total;
}

/// Lower-left convex frontier in the (D, E) plane: vertices with D strictly
/// increasing, E strictly decreasing, slopes dE/dD strictly increasing.
/// Ties: equal-D points keep the min-E one; equal-(D,E) points keep the
/// smallest policy_id (lexicographically smallest policy under the
/// enumeration order); collinear interior vertices are dropped.
template <typename Scalar>
std::vector<TradeoffPoint<Scalar>> tradeoff_frontier(
    std::vector<TradeoffPoint<Scalar>> points) {
  if (points.empty()) throw std::invalid_argument("frontier needs >= 1 point");
  std::sort(points.begin(), points.end(),
            [](const TradeoffPoint<Scalar>& a, const TradeoffPoint<Scalar>& b) {
              if (a.D != b.D) return a.D < b.D;
              if (a.E != b.E) return a.E < b.E;
              return a.policy_id < b.policy_id;
            });

  // One candidate per D (its min-E point); the sort already put it first.
  std::vector<TradeoffPoint<Scalar>> unique_d;
  for (const auto& pt : points) {
    if (unique_d.empty() || pt.D != unique_d.back().D) unique_d.push_back(pt);
  }

  // Andrew monotone chain, lower hull: pop while the new point makes the
  // last vertex non-strictly convex (cross <= 0 also drops collinear ones).
  std::vector<TradeoffPoint<Scalar>> hull;
  for (const auto& pt : unique_d) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      const Scalar cross =
          (b.D - a.D) * (pt.E - a.E) - (b.E - a.E) * (pt.D - a.D);
      if (cross <= Scalar(0)) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(pt);
  }

  // Keep only the strictly E-decreasing prefix: beyond the global min-E
  // vertex every hull point is dominated (larger D and larger E).
  std::size_t cut = 0;
  for (std::size_t i = 1; i < hull.size(); ++i) {
    if (hull[i].E < hull[cut].E) cut = i;
  }
  hull.resize(cut + 1);
  return hull;
}

/// Solves the unconstrained problem per lambda; entries ordered as `lambdas`.
template <typename Scalar>
std::vector<SweepEntry<Scalar>> sweep_lambda(QueueParams p,
                                             const std::vector<Scalar>& lambdas,
                                             int ref_state = 0,
                                             Scalar tol = Scalar(1e-10),
                                             std::int64_t max_iter = 1000000) {
  if (lambdas.empty()) throw std::invalid_argument("lambdas must be nonempty");
  for (const Scalar l : lambdas) {
    if (!(l >= Scalar(0))) throw std::invalid_argument("lambda must be >= 0");
  }
  std::vector<SweepEntry<Scalar>> out;
  out.reserve(lambdas.size());
  for (const Scalar l : lambdas) {
    p.lambda = static_cast<double>(l);
    const auto model = build_transition_model<Scalar>(p);
    SweepEntry<Scalar> entry;
    entry.lambda = l;
    entry.solve = relative_value_iteration(model, ref_state, tol, max_iter);
    entry.eval = evaluate_policy(model, entry.solve.policy);
    out.push_back(std::move(entry));
  }
  return out;
}

/// Smallest mixture of frontier policies meeting the power budget E <= E_th
/// with minimal delay: the min-delay vertex if the budget is slack, otherwise
/// the time-sharing blend of the two adjacent vertices whose powers bracket
/// E_th. Weights are long-run time-sharing fractions.
template <typename Scalar>
Mixture<Scalar> constraint_solve(
    const std::vector<TradeoffPoint<Scalar>>& frontier, Scalar E_th) {
  if (frontier.empty()) throw std::invalid_argument("frontier is empty");
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    if (!(frontier[i].D > frontier[i - 1].D) ||
        !(frontier[i].E < frontier[i - 1].E)) {
      throw std::invalid_argument(
          "frontier vertices must have strictly increasing D and strictly "
          "decreasing E");
    }
  }

  Mixture<Scalar> mix;
  if (E_th >= frontier.front().E) {  // slack budget: min-delay vertex alone
    mix.weights = {{frontier.front().policy_id, Scalar(1)}};
    mix.D = frontier.front().D;
    mix.E = frontier.front().E;
    return mix;
  }
  if (E_th < frontier.back().E) {
    throw std::runtime_error(
        "infeasible power budget: E_th below the minimum achievable power");
  }
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    const auto& hi = frontier[i - 1];  // larger E, smaller D
    const auto& lo = frontier[i];
    if (E_th >= lo.E && E_th < hi.E) {
      const Scalar w = (E_th - lo.E) / (hi.E - lo.E);  // weight on `hi`
      if (w == Scalar(0)) {
        mix.weights = {{lo.policy_id, Scalar(1)}};
      } else {
        mix.weights = {{hi.policy_id, w}, {lo.policy_id, Scalar(1) - w}};
      }
      mix.D = w * hi.D + (Scalar(1) - w) * lo.D;
      mix.E = w * hi.E + (Scalar(1) - w) * lo.E;
      return mix;
    }
  }
  throw std::logic_error("unreachable: E_th not bracketed by the frontier");
}

/// One application of the optimistic Bellman operator:
/// (HQ)(s,a) = sum_s' P(s'|s,a) (R(s,a) + max over feasible a' of Q(s',a') + b(s,a)).
/// Infeasible cells stay NaN (the reward table's sentinel propagates).
/// Accepts any Eigen matrix expressions for Q and bonus.
template <typename Scalar, typename DerivedQ, typename DerivedB>
MatrixX<Scalar> h_operator(const TransitionModel<Scalar>& model,
                           const Eigen::MatrixBase<DerivedQ>& Q_in,
                           const Eigen::MatrixBase<DerivedB>& bonus_in) {
  const auto& Q = Q_in.derived();
  const auto& bonus = bonus_in.derived();
  const int S = model.num_states();
  const int A = model.num_actions();
  if (Q.rows() != S || Q.cols() != A || bonus.rows() != S || bonus.cols() != A) {
    throw std::invalid_argument("Q and bonus must be (B+1) x (C+1)");
  }
  VectorX<Scalar> m(S);
  for (int q = 0; q < S; ++q) {
    const ActionRange r = model.feasible[q];
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (int c = r.lo; c <= r.hi; ++c) best = std::max(best, Q(q, c));
    m(q) = best;
  }
  MatrixX<Scalar> HQ(S, A);
  for (int c = 0; c < A; ++c) {
    HQ.col(c) = model.rewards.col(c) + bonus.col(c) + model.kernel[c] * m;
  }
  return HQ;
}

}  // namespace qsched
