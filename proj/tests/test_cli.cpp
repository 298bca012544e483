#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ticert_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + TICERT_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string chain_arg(const std::string& name) {
  return "--chain \"" + ticert::testing::fixture(name) + "\"";
}

std::string out_arg(const fs::path& dir) { return "--out \"" + dir.string() + "\""; }

std::vector<std::string> column(const std::string& csv, std::size_t index) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    for (std::size_t i = 0; i <= index; ++i) std::getline(row, cell, ',');
    out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST_CASE("info and functionals") {
  const auto dir = scratch("info");
  auto r = run(chain_arg("birth_death3.json") + " " + out_arg(dir) + " info", dir);
  REQUIRE(r.code == 0);
  const auto doc = json::parse(slurp(dir / "info.json"));
  CHECK(doc["states"] == 3);
  CHECK(doc["labels"][1] == "mid");
  CHECK(slurp(dir / "info.csv").rfind("state,label,mu,exit_rate\n", 0) == 0);

  r = run(chain_arg("two_state.json") + " " + out_arg(dir) + " fisher --nu 0.25,0.75", dir);
  REQUIRE(r.code == 0);
  // (sqrt(3/4) - sqrt(1/4))^2 = 1 - sqrt(3)/2.
  CHECK(json::parse(slurp(dir / "fisher.json"))["value"].get<double>() ==
        doctest::Approx(1.0 - std::sqrt(3.0) / 2.0).epsilon(1e-12));

  r = run(chain_arg("two_state.json") + " " + out_arg(dir) + " entropy --nu 1,0", dir);
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(dir / "entropy.json"))["value"].get<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  r = run(chain_arg("birth_death3.json") + " " + out_arg(dir) + " wasserstein --nu 1,0,0", dir);
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(dir / "wasserstein.json")).contains("distance"));

  r = run(chain_arg("two_state.json") + " " + out_arg(dir) + " fklograte --f 0,2", dir);
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(dir / "fklograte.json"))["lograte"].get<double>() ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("certify on the two-state fixture") {
  const auto dir = scratch("certify");
  const auto r = run(chain_arg("two_state.json") + " " + out_arg(dir) +
                         " certify --ineq w1i --n 1",
                     dir);
  REQUIRE(r.code == 0);
  const std::string text = slurp(dir / "certify.json");
  const auto doc = json::parse(text);
  CHECK(doc["constant_lower"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(doc["name"] == "W1I");
  // Round trip with fixed key order.
  CHECK(doc.dump(2) + "\n" == text);
  CHECK(fs::exists(dir / "certify.csv"));
  CHECK(fs::exists(dir / "certify_ledger.csv"));
}

TEST_CASE("sanov with a linear functional has zero gaps") {
  const auto dir = scratch("sanov");
  const auto r = run(chain_arg("two_state.json") + " " + out_arg(dir) +
                         " sanov --F linear --f 0,2 --n-list 1,2,3,4",
                     dir);
  REQUIRE(r.code == 0);
  const auto gaps = column(slurp(dir / "sanov.csv"), 3);
  REQUIRE(gaps.size() == 4);
  for (const auto& g : gaps) CHECK(std::abs(std::stod(g)) < 1e-6);
}

TEST_CASE("deviate: certified constant passes, a small constant fails") {
  const auto dir = scratch("deviate");
  auto r = run(chain_arg("two_state.json") + " " + out_arg(dir) +
                   " --seed 5 deviate --n 1 --t 20 --r-list 0.1,0.2 --paths 4000 --C 0.5",
               dir);
  CHECK(r.code == 0);
  r = run(chain_arg("two_state.json") + " " + out_arg(dir) +
              " --seed 5 deviate --n 1 --t 20 --r-list 0.1,0.2 --paths 4000 --C 0.01",
          dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("r=0.1") != std::string::npos);
  CHECK(r.err.find("t=20") != std::string::npos);
}

TEST_CASE("fixed seed gives byte-identical CSV") {
  const auto a = scratch("repeat_a");
  const auto b = scratch("repeat_b");
  const std::string args = " --seed 9 deviate --n 2 --t 10 --r-list 0.05,0.1 --paths 3000 --C 1";
  REQUIRE(run(chain_arg("two_state.json") + " " + out_arg(a) + args, a).code == 0);
  REQUIRE(run(chain_arg("two_state.json") + " " + out_arg(b) + " --workers 1" + args, b).code == 0);
  CHECK(slurp(a / "deviate.csv") == slurp(b / "deviate.csv"));
  const std::string sanov = " sanov --F clipw2 --n-list 1,2,3";
  REQUIRE(run(chain_arg("two_state.json") + " " + out_arg(a) + sanov, a).code == 0);
  REQUIRE(run(chain_arg("two_state.json") + " " + out_arg(b) + sanov, b).code == 0);
  CHECK(slurp(a / "sanov.csv") == slurp(b / "sanov.csv"));
}

TEST_CASE("errors exit with 1 and a qualified code") {
  const auto dir = scratch("errors");
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"states": ["a", "b", "c"],
    "rates": [[-1, 1, 0], [1, -2, 1], [0, 1.1, -1]], "metric": "discrete"})";
  auto r = run("--chain \"" + bad.string() + "\" info", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("cli.InvariantViolation") != std::string::npos);
  CHECK(r.err.find("row 2 sums to 0.1") != std::string::npos);

  r = run("--chain \"" + (dir / "missing.json").string() + "\" info", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("cli.ParseError") != std::string::npos);

  r = run(chain_arg("two_state.json") + " --budget 3 " + out_arg(dir) +
              " sanov --F linear --n-list 2",
          dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("BudgetExceeded") != std::string::npos);

  r = run(chain_arg("two_state.json") + " certify --ineq w9i", dir);
  CHECK(r.code == 1);
}

TEST_CASE("TI_CERT_BUDGET overrides the default budget") {
  const auto dir = scratch("envbudget");
  const std::string cmd = "TI_CERT_BUDGET=3 ";
  const auto out = dir / "o.txt";
  const int status =
      std::system((cmd + "\"" + TICERT_CLI_PATH + "\" " + chain_arg("two_state.json") + " " +
                   out_arg(dir) + " sanov --F linear --n-list 2 > \"" + out.string() +
                   "\" 2>&1")
                      .c_str());
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(slurp(out).find("BudgetExceeded") != std::string::npos);
}
