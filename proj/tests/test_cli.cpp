#include <door/report.hpp>
#include <door/simulation.hpp>

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace door;
using nlohmann::json;

namespace {

std::string tmp_path(const std::string& stem) {
  static int counter = 0;
  return (std::filesystem::temp_directory_path() /
          ("door_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" +
           stem))
      .string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOOR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Fixture {
  std::string csv = tmp_path("fixture.csv");
  Fixture() {
    SimConfig config;
    config.n = 1000;
    config.delta = 0.4;
    config.seed = 20240601;
    write_csv(gen_dataset(config, 1), csv);
  }
  ~Fixture() { std::remove(csv.c_str()); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("analyze runs all methods and orders crude above DR") {
  Fixture fx;
  const std::string out = tmp_path("report.json");
  const int rc = run_cli("analyze --data " + fx.csv +
                         " --outcome outcome --treatment treatment --levels 4"
                         " --ps-covars X1,X2,X3,X4 --po-covars X1,X2,X3,X4"
                         " --methods crude,iptw,gformula,dr --format json --out " + out);
  REQUIRE(rc == 0);
  const json j = json::parse(slurp(out));
  CHECK(j.at("schema_version").get<int>() == 1);
  CHECK(j.at("n").get<int>() == 1000);
  REQUIRE(j.at("methods").size() == 4);

  double crude_d = 0.0, dr_d = 0.0;
  for (const auto& row : j.at("methods")) {
    const double est = row.at("estimate").get<double>();
    CHECK(row.at("ci_lower").get<double>() <= est);
    CHECK(row.at("ci_upper").get<double>() >= est);
    if (row.at("method") == "crude") crude_d = est;
    if (row.at("method") == "dr") dr_d = est;
  }
  // the DGP's confounding inflates the crude estimate
  CHECK(crude_d > dr_d);

  // JSON round-trips losslessly through the typed report
  const AnalysisReport parsed = analysis_report_from_json(j);
  CHECK(to_json(parsed) == j);
  std::remove(out.c_str());
}

TEST_CASE("dichotomize adds one forest row per cut") {
  Fixture fx;
  const std::string out = tmp_path("dich.json");
  const int rc = run_cli("analyze --data " + fx.csv +
                         " --outcome outcome --treatment treatment --levels 4"
                         " --ps-covars X1,X2,X3,X4 --po-covars X1,X2,X3,X4"
                         " --methods dr --dichotomize --format json --out " + out);
  REQUIRE(rc == 0);
  const json j = json::parse(slurp(out));
  REQUIRE(j.at("methods").size() == 1);
  REQUIRE(j.at("dichotomies").size() == 3);  // cuts 2, 3, 4
  int expected_cut = 2;
  for (const auto& row : j.at("dichotomies")) {
    CHECK(row.at("cut").get<int>() == expected_cut++);
    CHECK(row.at("method") == "dr");
    CHECK(row.at("ci_lower").get<double>() <= row.at("estimate").get<double>());
  }
  std::remove(out.c_str());
}

TEST_CASE("truth command reports the null value") {
  const std::string out = tmp_path("truth.json");
  const int rc = run_cli("truth --delta 0 --draws 200000 --format json --out " + out);
  REQUIRE(rc == 0);
  const json j = json::parse(slurp(out));
  CHECK(std::abs(j.at("d_true").get<double>() - 0.5) <= 0.002);
  std::remove(out.c_str());
}

TEST_CASE("simulate output is byte-identical across reruns and thread counts") {
  const std::string out1 = tmp_path("sim1.csv");
  const std::string out2 = tmp_path("sim2.csv");
  const std::string base =
      "simulate --n 300 --reps 40 --seed 7 --draws 100000 --format csv --out ";
  REQUIRE(run_cli(base + out1 + " --threads 1") == 0);
  REQUIRE(run_cli(base + out2 + " --threads 4") == 0);
  const std::string a = slurp(out1), b = slurp(out2);
  CHECK(!a.empty());
  CHECK(a == b);
  REQUIRE(run_cli(base + out2 + " --threads 2") == 0);
  CHECK(slurp(out2) == a);
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("power uses the nine-point default grid with a rising truth header") {
  const std::string out = tmp_path("power.json");
  const int rc =
      run_cli("power --n 300 --reps 60 --draws 100000 --seed 3 --format json --out " + out);
  REQUIRE(rc == 0);
  const json j = json::parse(slurp(out));
  REQUIRE(j.at("deltas").size() == 9);
  REQUIRE(j.at("cells").size() == 36);  // 9 deltas x 4 methods
  double first = -1.0, last = -1.0;
  for (const auto& c : j.at("cells")) {
    if (c.at("delta").get<double>() == 0.0) first = c.at("d_true").get<double>();
    if (c.at("delta").get<double>() == 0.4) last = c.at("d_true").get<double>();
  }
  CHECK(std::abs(first - 0.500) <= 0.004);
  CHECK(std::abs(last - 0.552) <= 0.006);
  std::remove(out.c_str());
}

TEST_CASE("validation failures exit with code 2") {
  CHECK(run_cli("analyze --data /nonexistent.csv --outcome y --treatment z --levels 2") == 2);
  CHECK(run_cli("simulate --scenario bogus --reps 1 --n 100") == 2);

  const std::string bad = tmp_path("bad.csv");
  {
    std::ofstream f(bad);
    f << "y,z\n1,1\n2,1\n1,1\n";  // single arm
  }
  CHECK(run_cli("analyze --data " + bad + " --outcome y --treatment z --levels 2") == 2);
  std::remove(bad.c_str());

  const std::string range = tmp_path("range.csv");
  {
    std::ofstream f(range);
    f << "y,z\n1,0\n5,1\n2,0\n2,1\n";  // outcome outside 1..4
  }
  CHECK(run_cli("analyze --data " + range + " --outcome y --treatment z --levels 4") == 2);
  std::remove(range.c_str());
}

TEST_CASE("fit failures exit with code 3") {
  const std::string sep = tmp_path("sep.csv");
  {
    std::ofstream f(sep);
    f << "y,z,x\n";
    for (int i = 0; i < 30; ++i) {
      const double x = i - 14.5;
      f << (1 + i % 2) << ',' << (x > 0 ? 1 : 0) << ',' << x << "\n";
    }
  }
  CHECK(run_cli("analyze --data " + sep +
                " --outcome y --treatment z --levels 2 --ps-covars x --methods iptw") == 3);
  std::remove(sep.c_str());
}

TEST_CASE("hajek without bootstrap is refused") {
  Fixture fx;
  CHECK(run_cli("analyze --data " + fx.csv +
                " --outcome outcome --treatment treatment --levels 4"
                " --ps-covars X1,X2,X3,X4 --methods iptw --hajek") == 2);
}

}  // TEST_SUITE
