#include <qsched/run_config.hpp>

#include <qsched/csv.hpp>

#include <charconv>
#include <set>
#include <stdexcept>
#include <string_view>

namespace qsched {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " +
                              what);
}

template <typename T>
T parse_number(std::string_view v, int line, const char* key) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  const std::from_chars_result res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last) {
    fail(line, std::string("cannot parse value '") + std::string(v) +
                   "' for key '" + key + "'");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = v.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(v.substr(start)));
      break;
    }
    out.push_back(trim(v.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::vector<T> parse_number_list(std::string_view v, int line, const char* key) {
  std::vector<T> out;
  for (const std::string_view item : split_list(v)) {
    out.push_back(parse_number<T>(item, line, key));
  }
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::vector<std::string> unknown;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos, (eol == std::string::npos
                                                  ? text.size()
                                                  : eol) - pos);
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");

    if (key == "B") {
      cfg.params.B = parse_number<int>(value, line_no, "B");
    } else if (key == "M") {
      cfg.params.M = parse_number<int>(value, line_no, "M");
    } else if (key == "C") {
      cfg.params.C = parse_number<int>(value, line_no, "C");
    } else if (key == "alpha") {
      cfg.params.alpha = parse_number<double>(value, line_no, "alpha");
    } else if (key == "lambda") {
      cfg.params.lambda = parse_number<double>(value, line_no, "lambda");
    } else if (key == "sigma") {
      cfg.learner.sigma = parse_number<double>(value, line_no, "sigma");
    } else if (key == "delta") {
      cfg.learner.delta = parse_number<double>(value, line_no, "delta");
    } else if (key == "epsilon") {
      cfg.learner.epsilon = parse_number<double>(value, line_no, "epsilon");
    } else if (key == "phi") {
      cfg.learner.phi = parse_number<double>(value, line_no, "phi");
    } else if (key == "theta") {
      cfg.learner.theta = parse_number<double>(value, line_no, "theta");
    } else if (key == "ref_state") {
      cfg.learner.ref_state = parse_number<int>(value, line_no, "ref_state");
    } else if (key == "horizon") {
      cfg.horizon = parse_number<std::int64_t>(value, line_no, "horizon");
    } else if (key == "seeds") {
      cfg.seeds = parse_number_list<std::uint64_t>(value, line_no, "seeds");
    } else if (key == "agents") {
      cfg.agents.clear();
      for (const std::string_view item : split_list(value)) {
        parse_agent_kind(std::string(item));  // validates the name
        cfg.agents.emplace_back(item);
      }
    } else if (key == "out") {
      cfg.out = std::string(value);
    } else if (key == "lambdas") {
      cfg.lambdas = parse_number_list<double>(value, line_no, "lambdas");
    } else if (key == "alphas") {
      cfg.alphas = parse_number_list<double>(value, line_no, "alphas");
    } else if (key == "max_policies") {
      cfg.max_policies =
          parse_number<std::int64_t>(value, line_no, "max_policies");
    } else {
      unknown.push_back(key);
    }
  }

  if (!unknown.empty()) {
    std::string msg = "unknown config keys: ";
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      if (i > 0) msg += ", ";
      msg += unknown[i];
    }
    throw std::invalid_argument(msg);
  }
  return cfg;
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  const auto kv = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  kv("B", std::to_string(cfg.params.B));
  kv("M", std::to_string(cfg.params.M));
  kv("C", std::to_string(cfg.params.C));
  kv("alpha", format_double(cfg.params.alpha));
  kv("lambda", format_double(cfg.params.lambda));
  kv("sigma", format_double(cfg.learner.sigma));
  kv("delta", format_double(cfg.learner.delta));
  kv("epsilon", format_double(cfg.learner.epsilon));
  kv("phi", format_double(cfg.learner.phi));
  kv("theta", format_double(cfg.learner.theta));
  kv("ref_state", std::to_string(cfg.learner.ref_state));
  kv("horizon", std::to_string(cfg.horizon));
  kv("seeds", join_numbers(cfg.seeds));
  std::string agents;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    if (i > 0) agents += ',';
    agents += cfg.agents[i];
  }
  kv("agents", agents);
  kv("out", cfg.out);
  kv("lambdas", join_numbers(cfg.lambdas));
  kv("alphas", join_numbers(cfg.alphas));
  kv("max_policies", std::to_string(cfg.max_policies));
  return out;
}

}  // namespace qsched
