#include <poisson3d/cli.hpp>
#include <poisson3d/poisson3d.hpp>

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace poisson3d;
using nlohmann::json;

namespace {
struct Run {
  int code;
  std::string out, err;
  json doc() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }
}  // namespace

TEST_CASE("list") {
  auto r = run({"list"});
  CHECK(r.code == 0);
  CHECK(r.out.find("halphen") != std::string::npos);
  CHECK(r.out.find("euler-top") != std::string::npos);
}

TEST_CASE("verify built-ins") {
  for (std::string sys : {"halphen", "circle-maps", "euler-top"}) {
    auto r = run({"verify", "--system", sys, "--samples", "300"});
    INFO(sys << r.err);
    CHECK(r.code == 0);
    auto d = r.doc();
    CHECK(d["verdict"] == "pass");
    CHECK(d["samples"] == 300);
    CHECK(d["seed"] == 42);
    CHECK(d["derivative_scheme"] == "analytic");
  }
  auto fd = run({"verify", "--system", "halphen", "--samples", "200", "--scheme", "fd"});
  CHECK(fd.code == 0);
  CHECK(fd.doc()["derivative_scheme"] == "finite-difference");
}

TEST_CASE("verify rejects a non-Poisson matrix") {
  auto path = temp_file("poisson3d_cli_broken.json");
  std::ofstream(path) << R"({"matrix": {"j12": "x3", "j23": "x1", "j31": "x2 + x1*x1"},
                             "domain": {"box": [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]]}})";
  auto r = run({"verify", "--spec", path.string(), "--samples", "100"});
  CHECK(r.code == 1);
  CHECK(r.doc()["verdict"] == "fail");
  auto c = run({"casimir", "--spec", path.string(), "--k", "3", "--point", "1,1,1"});
  CHECK(c.code == 2);
  std::filesystem::remove(path);
}

TEST_CASE("bad input exits with 2") {
  CHECK(run({"verify"}).code == 2);
  CHECK(run({"verify", "--system", "nope"}).code == 2);
  CHECK(run({"verify", "--system", "halphen", "--spec", "x.json"}).code == 2);
  CHECK(run({"verify", "--system", "halphen", "--scheme", "spline"}).code == 2);
  CHECK(run({"casimir", "--system", "halphen", "--k", "4", "--point", "1,2,4"}).code == 2);
  CHECK(run({"casimir", "--system", "halphen", "--k", "3", "--point", "1,2"}).code == 2);
  CHECK(run({"casimir", "--system", "halphen", "--k", "3", "--point", "1,1,4"}).code == 2);
  CHECK(run({"verify", "--system", "euler-top", "--I", "1,1,3"}).code == 2);
  CHECK(run({"verify", "--system", "halphen", "--box", "0,1,2"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  auto err = run({"verify", "--spec", "/nonexistent/spec.json"});
  CHECK(err.code == 2);
  CHECK(err.err.rfind("error: ", 0) == 0);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("casimir report") {
  auto r = run({"casimir", "--system", "halphen", "--k", "3", "--point", "1,2,4"});
  REQUIRE(r.code == 0);
  auto d = r.doc();
  CHECK(d["value"] == 2.0);
  CHECK(d["gradient"] == json::array({2.0, -3.0, 1.0}));
  CHECK(d["annihilation_residual"].get<double>() <= 1e-12);
}

TEST_CASE("darboux report") {
  auto r = run({"darboux", "--system", "euler-top", "--point", "1,1,1", "--check-samples", "200"});
  REQUIRE(r.code == 0);
  auto d = r.doc();
  CHECK(d["k"] == 3);
  CHECK(d["sign_branch"] == json::array({1, 1, 1}));
  CHECK(d["check"]["verdict"] == "pass");
  CHECK(d["point"]["y"][2].get<double>() == Catch::Approx(7.0 / 15).epsilon(1e-14));
  CHECK(d["point"]["x_of_y"][2].get<double>() == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("seeding and determinism") {
  std::vector<std::string> args{"verify", "--system", "euler-top", "--samples", "100"};
  CHECK(run(args).out == run(args).out);
  auto w1 = args, w4 = args;
  w1.insert(w1.end(), {"--workers", "1"});
  w4.insert(w4.end(), {"--workers", "4"});
  CHECK(run(w1).out == run(w4).out);

  ::setenv("POISSON3D_SEED", "7", 1);
  auto env = run(args);
  ::unsetenv("POISSON3D_SEED");
  CHECK(env.doc()["seed"] == 7);
  auto flag = args;
  flag.insert(flag.end(), {"--seed", "7"});
  CHECK(run(flag).out == env.out);
  CHECK(run(args).doc()["seed"] == 42);
}

TEST_CASE("simulate writes a CSV") {
  auto path = temp_file("poisson3d_cli_sim.csv");
  auto r = run({"simulate", "--system", "halphen", "--box", "-10,10", "--x0", "1,2,4", "--t-end", "0.01", "--dt", "1e-3", "--k", "3",
                "--out", path.string()});
  REQUIRE(r.code == 0);
  auto d = r.doc();
  CHECK(d["samples"] == 11);
  CHECK(d["k"] == 3);
  CHECK(d["drift"]["max_abs_casimir"].get<double>() <= 1e-12);
  std::string csv = slurp(path);
  CHECK(csv.rfind("t,tau,x1,x2,x3,H,C\n0,,1,2,4,7,2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);

  auto red = run({"simulate", "--system", "halphen", "--box", "-10,10", "--x0", "1,2,4", "--t-end", "-0.001", "--dt",
                  "-1e-4", "--reduced", "--k", "3", "--out", path.string()});
  REQUIRE(red.code == 0);
  CHECK(red.doc()["reduced"] == true);
  CHECK(slurp(path).find("\n0,0,1,2,4,7,2\n") != std::string::npos);

  auto exit = run({"simulate", "--system", "halphen", "--x0", "0.1,0.5,0.9", "--t-end", "100", "--dt", "1e-2",
                   "--out", path.string()});
  CHECK(exit.code == 2);
  CHECK(run({"simulate", "--system", "halphen", "--x0", "0.1,0.5,0.9", "--t-end", "1", "--dt", "0", "--out",
             path.string()})
            .code == 2);
  std::filesystem::remove(path);
}
