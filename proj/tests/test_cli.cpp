#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mmflow::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_tmp(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "mmflow_cli_tests";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path.string();
}

const char* kTwoAtoms = R"({"atoms": [[-1], [1]], "weights": [0.5, 0.5]})";

}  // namespace

TEST_CASE("cli solve") {
  const auto mu = write_tmp("two.json", kTwoAtoms);
  const auto r = run({"solve", "--mu", mu, "--tol", "1e-8"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["residual"].get<double>() <= 1e-8);
  CHECK(std::fabs(j["offsets"][0].get<double>() + std::log(2.0)) <= 1e-6);
  CHECK(std::fabs(j["offsets"][1].get<double>() + std::log(2.0)) <= 1e-6);

  const auto again = run({"solve", "--mu", mu, "--tol", "1e-8"});
  CHECK(again.out == r.out);

  const auto out_path = (fs::temp_directory_path() / "mmflow_cli_tests" / "report.json").string();
  const auto dens = (fs::temp_directory_path() / "mmflow_cli_tests" / "dens.json").string();
  CHECK(run({"solve", "--mu", mu, "--out", out_path, "--emit-density", dens}).code == 0);
  CHECK(Json::parse(std::ifstream(out_path))["converged"].get<bool>());
  CHECK(Json::parse(std::ifstream(dens)).contains("values"));
}

TEST_CASE("cli errors and exit codes") {
  CHECK(run({"solve", "--mu", "/nonexistent.json"}).code == 1);
  CHECK(run({"solve", "--bogus"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const auto off = write_tmp("off.json", R"({"atoms": [[1], [2]], "weights": [0.5, 0.5]})");
  const auto r = run({"solve", "--mu", off});
  CHECK(r.code == 1);
  CHECK(r.err.find("center mu first") != std::string::npos);
  const auto bad = write_tmp("bad.json", R"({"atoms": [[0], [1]], "weights": [0.5, 0.4]})");
  CHECK(run({"solve", "--mu", bad}).code == 1);
  const auto g = write_tmp("g.json", R"({"atoms": [[-2], [-1], [0.5], [2.5]], "weights": [0.25, 0.25, 0.25, 0.25]})");
  CHECK(run({"solve", "--mu", g, "--max-iter", "1", "--tol", "1e-14"}).code == 2);
}

TEST_CASE("cli transport") {
  const auto mu = write_tmp("two.json", kTwoAtoms);
  const auto r = run({"transport", "--rho", mu, "--mu", mu, "--cost", "dot"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(std::fabs(j["value"].get<double>() - 1.0) <= 1e-12);
  CHECK(j.contains("entries"));
  CHECK(j.contains("duals"));
  const auto sq = Json::parse(run({"transport", "--rho", mu, "--mu", mu, "--cost", "sq"}).out);
  CHECK(std::fabs(sq["value"].get<double>()) <= 1e-12);
  CHECK(run({"transport", "--rho", mu, "--mu", mu, "--cost", "l1"}).code == 1);

  const auto grid = write_tmp("grid.json", R"({"origin": [-1], "spacing": [0.5], "shape": [4], "values": [0.5, 0.5, 0.5, 0.5]})");
  const auto gr = Json::parse(run({"transport", "--rho", grid, "--mu", mu}).out);
  CHECK(std::fabs(gr["value"].get<double>() - 0.5) <= 1e-9);
}

TEST_CASE("cli demo hyperplane") {
  const auto r = run({"demo", "hyperplane", "--n", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("5, -2.302585") != std::string::npos);
  const auto full = run({"demo", "hyperplane"});
  std::istringstream lines(full.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 5);
}

TEST_CASE("cli primal and verify") {
  const auto mu = write_tmp("two.json", kTwoAtoms);
  const auto p = run({"primal", "--mu", mu, "--grid", "-10:10:1024"});
  REQUIRE(p.code == 0);
  CHECK(Json::parse(p.out)["converged"].get<bool>());

  const auto s = run({"verify", "suites", "--samples", "3", "--module", "measures", "--seed", "5"});
  CHECK(s.code == 0);
  CHECK(Json::parse(s.out)["passed"].get<bool>());
  CHECK(run({"verify", "suites", "--module", "nope"}).code == 1);

  const auto gap = run({"verify", "gap", "--mu", mu});
  REQUIRE(gap.code == 0);
  CHECK(Json::parse(gap.out)["gap"].get<double>() <= 1e-4);

  const auto u = write_tmp("u.json", R"({"sites": [[-1], [1]], "offsets": [-0.6931471805599453, -0.6931471805599453]})");
  const auto id = Json::parse(run({"verify", "identity", "--u", u}).out);
  CHECK(std::fabs(id["gap"].get<double>()) <= 1e-12);
  const auto grid = write_tmp("ent.json", R"({"origin": [0], "spacing": [0.25], "shape": [4], "values": [1, 1, 1, 1]})");
  const auto e = Json::parse(run({"verify", "entropy", "--rho", grid}).out);
  CHECK(std::fabs(e["entropy"].get<double>()) <= 1e-14);
}

TEST_CASE("cli u commands") {
  const auto u = write_tmp("u.json", R"({"sites": [[-1], [1]], "offsets": [-0.6931471805599453, -0.6931471805599453]})");
  const auto ev = Json::parse(run({"u", "eval", "--u", u, "--x", "0", "--x", "3"}).out);
  CHECK(ev[0]["index"] == 0);
  CHECK(ev[1]["index"] == 1);
  CHECK(std::fabs(ev[1]["value"].get<double>() - 3.0 - std::log(2.0)) <= 1e-15);
  const auto m = Json::parse(run({"u", "mass", "--u", u}).out);
  CHECK(std::fabs(m["Z"].get<double>() - 1.0) <= 1e-14);
  CHECK(run({"u", "cells", "--u", u}).code == 0);
  CHECK(run({"u", "eval", "--u", u, "--x", "1,2"}).code == 1);
}

TEST_CASE("cli threads do not change results") {
  const auto u = write_tmp("u2.json",
                           R"({"sites": [[1,1],[-1,1],[1,-1],[-1,-1],[0.3,0.1]], "offsets": [0,0,0,0,-0.2]})");
  const auto a = run({"--threads", "1", "u", "mass", "--u", u});
  const auto b = run({"--threads", "4", "u", "mass", "--u", u});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}
