#pragma once

#include <qsched/learners.hpp>
#include <qsched/queue_model.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace qsched {

/// Every knob a command can consume, serializable to a key=value config
/// file. Command-line flags override file keys; the effective values are
/// echoed into each run's metadata sidecar.
struct RunConfig {
  QueueParams params;      ///< keys B, M, C, alpha, lambda
  LearnerConfig learner;   ///< keys sigma, delta, epsilon, phi, theta, ref_state
  std::int64_t horizon = 1'000'000;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> agents{"qgreedyucb"};
  std::string out = ".";
  std::vector<double> lambdas;           ///< λ grid for `sweep`
  std::vector<double> alphas;            ///< α grid for `sweep`
  std::int64_t max_policies = 1'000'000; ///< enumeration cap for `tradeoff`

  bool operator==(const RunConfig&) const = default;
};

/// Parses config text: one `key = value` per line, `#` starts a comment,
/// blank lines ignored. Lists are comma-separated. Rejects malformed lines,
/// duplicate keys, unparsable values, invalid agent names, and — after the
/// full pass — all unknown keys together with their names listed.
RunConfig parse_config(const std::string& text);

/// Canonical text form containing every key exactly once;
/// parse_config(emit_config(c)) == c for every valid config.
std::string emit_config(const RunConfig& cfg);

}  // namespace qsched
