#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(QSCHED_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) {
    out.append(buf, n);
  }
  const int status = pclose(pipe);
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.output = out;
  return res;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qsched_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("solve prints the gain and writes the exact policy") {
  const fs::path dir = fresh_dir("solve");
  const CliResult res = run_cli("solve --out " + dir.string());
  CHECK(res.exit_code == 0);
  CHECK(res.output == "gain = -7.37053\n");
  CHECK(read_file(dir / "policy.csv") ==
        "state,action\n0,0\n1,1\n2,1\n3,2\n4,2\n5,2\n6,3\n7,3\n8,3\n9,4\n"
        "10,4\n");

  const json meta = json::parse(read_file(dir / "run_meta.json"));
  CHECK(meta.at("command") == "solve");
  CHECK(meta.at("B") == 10);
  CHECK(meta.at("M") == 5);
  CHECK(meta.at("C") == 4);
  CHECK(meta.at("alpha") == 0.4);
  CHECK(meta.at("generator") == "xoshiro256**-1.0");
  CHECK(meta.at("gain").get<double>() ==
        doctest::Approx(-7.370526315789474).epsilon(1e-9));
}

TEST_CASE("solve rejects B = M with the required message") {
  const fs::path dir = fresh_dir("solve_bm");
  const CliResult res =
      run_cli("solve --B 5 --M 5 --out " + dir.string());
  CHECK(res.exit_code != 0);
  CHECK(res.output.find("B must exceed M") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "policy.csv"));
}

TEST_CASE("reruns are byte-identical") {
  const fs::path dir = fresh_dir("solve_repeat");
  REQUIRE(run_cli("solve --out " + dir.string()).exit_code == 0);
  const std::string policy1 = read_file(dir / "policy.csv");
  const std::string meta1 = read_file(dir / "run_meta.json");
  REQUIRE(run_cli("solve --out " + dir.string()).exit_code == 0);
  CHECK(read_file(dir / "policy.csv") == policy1);
  CHECK(read_file(dir / "run_meta.json") == meta1);

  const std::string train_args = " --B 6 --M 3 --C 3 --alpha 0.5 --horizon "
                                 "2000 --seed 4 --agent qlearning --out " +
                                 dir.string();
  REQUIRE(run_cli("train" + train_args).exit_code == 0);
  const std::string metrics1 = read_file(dir / "metrics.csv");
  const std::string qtable1 = read_file(dir / "qtable.csv");
  REQUIRE(run_cli("train" + train_args).exit_code == 0);
  CHECK(read_file(dir / "metrics.csv") == metrics1);
  CHECK(read_file(dir / "qtable.csv") == qtable1);
}

TEST_CASE("train writes metrics, policy, and q-table artifacts") {
  const fs::path dir = fresh_dir("train");
  const CliResult res = run_cli(
      "train --B 6 --M 3 --C 3 --alpha 0.5 --horizon 1000 --seed 1 "
      "--agent qgreedyucb --out " +
      dir.string());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("agent = qgreedyucb") != std::string::npos);

  const auto metrics = read_csv(dir / "metrics.csv");
  REQUIRE(metrics.size() == 1001);  // header + dense schedule at T=1000
  CHECK(metrics[0] ==
        std::vector<std::string>{"t", "cum_reward", "avg_reward", "regret"});
  CHECK(metrics[1][0] == "1");
  CHECK(metrics[1][1] == "0");  // first step from the empty queue pays 0
  CHECK(metrics.back()[0] == "1000");

  const auto policy = read_csv(dir / "policy.csv");
  REQUIRE(policy.size() == 8);  // header + states 0..6
  CHECK(policy[0] == std::vector<std::string>{"state", "action"});
  CHECK(policy[1][0] == "0");
  CHECK(policy[1][1] == "0");  // only feasible action at q=0

  const auto qtable = read_csv(dir / "qtable.csv");
  REQUIRE(qtable.size() == 17);  // header + 16 feasible (state, action) pairs
  CHECK(qtable[0] == std::vector<std::string>{"state", "action", "Q", "Qhat",
                                              "N"});
  long long visits = 0;
  for (std::size_t i = 1; i < qtable.size(); ++i) {
    visits += std::atoll(qtable[i][4].c_str());
  }
  CHECK(visits == 1000);  // every slot updates exactly one feasible cell

  const json meta = json::parse(read_file(dir / "run_meta.json"));
  CHECK(meta.at("command") == "train");
  CHECK(meta.at("seed") == 1);
  CHECK(meta.at("horizon") == 1000);
  CHECK(meta.at("g_star").is_number());
  CHECK(meta.at("first_match_step").is_number());
}

TEST_CASE("train usage errors") {
  const fs::path dir = fresh_dir("train_err");
  CHECK(run_cli("train --horizon 0 --out " + dir.string()).exit_code != 0);
  const CliResult bad_agent = run_cli(
      "train --agent bogus --horizon 10 --out " + dir.string());
  CHECK(bad_agent.exit_code != 0);
  CHECK(bad_agent.output.find("unknown agent") != std::string::npos);
  CHECK(run_cli("train --agents qgreedyucb,qlearning --horizon 10 --out " +
                dir.string())
            .exit_code != 0);
  CHECK(run_cli("train --seeds 1,2 --horizon 10 --out " + dir.string())
            .exit_code != 0);
}

TEST_CASE("tradeoff enumerates 40 policies and flags the frontier") {
  const fs::path dir = fresh_dir("tradeoff");
  const CliResult res = run_cli(
      "tradeoff --B 6 --M 3 --C 3 --alpha 0.5 --out " + dir.string());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("policies = 40") != std::string::npos);

  const auto rows = read_csv(dir / "tradeoff.csv");
  REQUIRE(rows.size() == 41);
  CHECK(rows[0] == std::vector<std::string>{"policy_id", "D", "E",
                                            "on_frontier"});
  int flagged = 0;
  double prev_d = -1, prev_e = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double d = std::strtod(rows[i][1].c_str(), nullptr);
    const double e = std::strtod(rows[i][2].c_str(), nullptr);
    if (i > 1) {
      CHECK(d >= prev_d);  // sorted by D ascending
      if (d == prev_d) CHECK(e >= prev_e);
    }
    prev_d = d;
    prev_e = e;
    CHECK((rows[i][3] == "0" || rows[i][3] == "1"));
    flagged += rows[i][3] == "1";
  }
  CHECK(flagged == 5);
  // The minimum-delay vertex is the lexicographically smallest such policy.
  CHECK(rows[1][0] == "13");
  CHECK(rows[1][3] == "1");

  const CliResult capped = run_cli(
      "tradeoff --B 6 --M 3 --C 3 --max-policies 10 --out " + dir.string());
  CHECK(capped.exit_code != 0);
  CHECK(capped.output.find("40") != std::string::npos);
  CHECK(capped.output.find("exceeds") != std::string::npos);
}

TEST_CASE("sweep over lambda: E nonincreasing; failures keep the grid going") {
  const fs::path dir = fresh_dir("sweep");
  const CliResult res = run_cli(
      "sweep --B 6 --M 3 --C 3 --alpha 0.5 --lambdas 0,1,2 --out " +
      dir.string());
  CHECK(res.exit_code == 0);
  const auto rows = read_csv(dir / "sweep.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] ==
        std::vector<std::string>{"lambda", "gain", "D", "E", "policy"});
  double prev_e = 1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double e = std::strtod(rows[i][3].c_str(), nullptr);
    CHECK(e <= prev_e);
    prev_e = e;
  }

  const CliResult partial = run_cli(
      "sweep --B 6 --M 3 --C 3 --lambdas 0,-1,2 --out " + dir.string());
  CHECK(partial.exit_code != 0);
  CHECK(partial.output.find("lambda=-1 failed") != std::string::npos);
  CHECK(read_csv(dir / "sweep.csv").size() == 3);  // header + 2 good points

  CHECK(run_cli("sweep --B 6 --M 3 --C 3 --out " + dir.string()).exit_code !=
        0);
  CHECK(run_cli("sweep --B 6 --M 3 --C 3 --lambdas 1 --alphas 0.3 --out " +
                dir.string())
            .exit_code != 0);
}

TEST_CASE("sweep over alpha writes per-alpha policy files") {
  const fs::path dir = fresh_dir("sweep_alpha");
  const CliResult res =
      run_cli("sweep --alphas 0.3,0.5 --out " + dir.string());
  CHECK(res.exit_code == 0);
  const auto rows = read_csv(dir / "sweep.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "alpha");
  CHECK(rows[1][0] == "0.3");
  CHECK(rows[2][0] == "0.5");
  // Gain decreases with the arrival rate.
  CHECK(std::strtod(rows[2][1].c_str(), nullptr) <
        std::strtod(rows[1][1].c_str(), nullptr));
  for (const char* name : {"policy_alpha_0.3.csv", "policy_alpha_0.5.csv"}) {
    const auto pol = read_csv(dir / name);
    REQUIRE(pol.size() == 12);  // header + states 0..10
    CHECK(pol[0] == std::vector<std::string>{"state", "action"});
  }
}

TEST_CASE("compare rows reproduce individual train runs") {
  const fs::path cdir = fresh_dir("compare");
  const std::string shared =
      "--B 6 --M 3 --C 3 --alpha 0.5 --horizon 2000 ";
  const CliResult res = run_cli("compare " + shared +
                                "--seeds 5 --agents qgreedyucb,qlearning "
                                "--out " +
                                cdir.string());
  CHECK(res.exit_code == 0);
  const auto rows = read_csv(cdir / "compare.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"agent", "seed",
                                            "final_avg_reward", "final_regret",
                                            "first_match_step"});
  CHECK(rows[1][0] == "qgreedyucb");
  CHECK(rows[2][0] == "qlearning");
  CHECK(rows[1][1] == "5");

  for (const char* agent : {"qgreedyucb", "qlearning"}) {
    const fs::path tdir = fresh_dir(std::string("compare_train_") + agent);
    REQUIRE(run_cli("train " + shared + "--seed 5 --agent " + agent +
                    " --out " + tdir.string())
                .exit_code == 0);
    CHECK(read_file(tdir / "metrics.csv") ==
          read_file(cdir / (std::string("metrics_") + agent + "_5.csv")));
  }

  CHECK(run_cli("compare " + shared +
                "--seeds 1 --agents qgreedyucb,qgreedyucb --out " +
                cdir.string())
            .exit_code != 0);
  CHECK(run_cli("compare " + shared + "--seeds 1 --agents qgreedyucb --out " +
                cdir.string())
            .exit_code != 0);
}

TEST_CASE("config file keys are overridden by flags and unknown keys rejected") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream cfg(dir / "fig.cfg");
    cfg << "# second configuration\nB = 12\nM = 5\nC = 5\nalpha = 0.4\n"
           "lambda = 1\n";
  }
  const CliResult file_only = run_cli(
      "solve --config " + (dir / "fig.cfg").string() + " --out " + dir.string());
  CHECK(file_only.exit_code == 0);
  CHECK(file_only.output == "gain = -7.64528\n");

  const CliResult overridden = run_cli(
      "solve --config " + (dir / "fig.cfg").string() +
      " --B 10 --C 4 --out " + dir.string());
  CHECK(overridden.exit_code == 0);
  CHECK(overridden.output == "gain = -7.37053\n");

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "B = 10\nbogus_key = 3\nanother = x\n";
  }
  const CliResult bad = run_cli(
      "solve --config " + (dir / "bad.cfg").string() + " --out " + dir.string());
  CHECK(bad.exit_code != 0);
  CHECK(bad.output.find("unknown config keys") != std::string::npos);
  CHECK(bad.output.find("bogus_key") != std::string::npos);
  CHECK(bad.output.find("another") != std::string::npos);

  const CliResult missing = run_cli(
      "solve --config " + (dir / "nope.cfg").string() + " --out " + dir.string());
  CHECK(missing.exit_code != 0);
  CHECK(missing.output.find("cannot read config file") != std::string::npos);
}

TEST_CASE("top-level usage errors exit nonzero") {
  CHECK(run_cli("").exit_code != 0);
  CHECK(run_cli("frobnicate").exit_code != 0);
  CHECK(run_cli("solve --no-such-flag 1").exit_code != 0);
}
