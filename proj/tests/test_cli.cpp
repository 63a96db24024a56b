#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#ifndef HCP_CLI_PATH
#error "HCP_CLI_PATH must point at the built binary"
#endif

namespace {

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(HCP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), got);
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty() && line.front() == '{') out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("simulate --N 2 --n 2 --delta 1 --alpha geometric:0.5 --t 1 --replicas 0 --seed 1")
            .exit_code == 2);
  CHECK(run("simulate").exit_code == 2);
  CHECK(run("nonsense").exit_code == 2);
  CHECK(run("simulate --N 2 --n 2 --delta 1 --alpha bogus:1 --t 1 --replicas 1").exit_code == 2);
}

TEST_CASE("simulate: t = 0 gives certain survival") {
  auto r = run("simulate --N 2 --n 2 --delta 1 --alpha geometric:0.5 --t 0 --replicas 50 "
               "--seed 3");
  REQUIRE(r.exit_code == 0);
  auto lines = json_lines(r.out);
  REQUIRE_FALSE(lines.empty());
  auto summary = lines.back();
  CHECK(summary.at("schema") == "hcp/1");
  CHECK(summary.at("p_hat") == 1.0);
}

TEST_CASE("simulate output is reproducible modulo timing fields") {
  std::string args = "simulate --N 3 --n 2 --delta 0.5 --alpha geometric:0.5 --t 2 "
                     "--replicas 200 --seed 11";
  auto a = run(args), b = run(args);
  REQUIRE(a.exit_code == 0);
  auto la = json_lines(a.out), lb = json_lines(b.out);
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    la[i].erase("wall_time_s");
    lb[i].erase("wall_time_s");
    CHECK(la[i] == lb[i]);
  }
}

TEST_CASE("verify: default grid passes, corrupted xi fails") {
  auto ok = run("verify --grid 4 --seed 2");
  CHECK(ok.exit_code == 0);
  for (const auto& j : json_lines(ok.out)) CHECK(j.at("pass") == true);

  auto bad = run("verify --check intertwine --delta 1 --alpha 2 --alpha 1 --xi-override 0.4");
  CHECK(bad.exit_code == 1);

  auto two = run("verify --check two-level --xi 0.25");
  CHECK(two.exit_code == 0);
  for (const auto& j : json_lines(two.out)) {
    CHECK(j.at("pass") == true);
    CHECK(j.at("max_table_residual").get<double>() < 1e-12);
  }
}

TEST_CASE("couple: conditional and marginal checks pass") {
  auto r = run("couple --n 2 --delta 1 --alpha explicit:2,1 --t 1 --replicas 20000 --seed 5 "
               "--test both");
  CHECK(r.exit_code == 0);
  auto lines = json_lines(r.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].at("pooled_p").get<double>() > 1e-3);
  CHECK(lines[1].at("tv_vs_plain").get<double>() < 0.02);
}

TEST_CASE("bounds: regime verdicts") {
  auto pos = run("bounds --family double_exp:1.5 --N 2 --delta 0.001");
  REQUIRE(pos.exit_code == 0);
  bool saw_positive = false;
  for (const auto& j : json_lines(pos.out))
    if (j.contains("verdict") && j.at("verdict") == "positive") saw_positive = true;
  CHECK(saw_positive);

  auto fast = run("bounds --family double_exp:3 --N 2 --delta 0.01");
  REQUIRE(fast.exit_code == 0);
  bool saw_cert = false;
  for (const auto& j : json_lines(fast.out)) {
    if (j.contains("verdict")) CHECK(j.at("verdict") != "positive");
    if (j.contains("found") && j.at("found") == true) saw_cert = true;
  }
  CHECK(saw_cert);
}

TEST_CASE("bracket: CSV table with the regime endpoints") {
  auto br = run("bracket --family double_exp:3 --N 2 --grid-min 1e-4");
  REQUIRE(br.exit_code == 0);
  REQUIRE(br.out.find("family,lower,upper") != std::string::npos);
  // lower = 0 (never certified positive), upper small.
  auto pos = br.out.find('\n');
  std::string row = br.out.substr(pos + 1);
  CHECK(row.substr(0, row.find(',')) == "double_exp:3");
  CHECK(row.find(",0,") != std::string::npos);

  auto slow = run("bracket --family double_exp:1.5 --N 2");
  REQUIRE(slow.exit_code == 0);
  std::string srow = slow.out.substr(slow.out.find('\n') + 1);
  auto c1 = srow.find(',');
  double lower = std::stod(srow.substr(c1 + 1));
  CHECK(lower > 0.0);
}

TEST_CASE("compare: reduction summary") {
  auto r = run("compare --N 3 --Nprime 2.5");
  REQUIRE(r.exit_code == 0);
  auto lines = json_lines(r.out);
  REQUIRE(lines.size() == 1);
  int m = lines[0].at("m").get<int>();
  int n = lines[0].at("n").get<int>();
  CHECK(std::pow(2.5, m) <= std::pow(2.0, n));
  CHECK(std::pow(2.0, n) <= std::pow(3.0, m));
  CHECK(lines[0].at("alpha_pp").size() == 18);
}
