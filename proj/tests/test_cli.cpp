#include "liftlab/cli.hpp"
#include "liftlab/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace liftlab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::vector<std::string> store{"liftlab"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : store) argv.push_back(s.data());
  std::ostringstream out, err;
  int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("liftlab_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int shell(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config renders and parses back to the same value") {
  RunConfig c = parse_config({"simulate", "--process", "zigzag", "--t-end", "50", "--d", "3", "--velocity-law",
                              "gaussian", "--seed", "7"});
  CHECK(c.subcommand == "simulate");
  CHECK(c.d == 3);
  CHECK(*c.t_end == 50.0);
  CHECK(config_from_json(render_config(c)) == c);
  RunConfig s = parse_config({"study", "--preset", "rtp-scaling", "--omegas", "0.1,1,10"});
  CHECK(s.omegas == std::vector<double>{0.1, 1.0, 10.0});
  CHECK(config_from_json(render_config(s)) == s);
}

TEST_CASE("hash ignores output location and thread count only") {
  RunConfig a = parse_config({"spectrum", "--process", "sticky-bm", "--omega", "1"});
  RunConfig b = a;
  b.out = "/elsewhere";
  b.threads = 3;
  CHECK(run_config_hash(a) == run_config_hash(b));
  b.seed = 43;
  CHECK(run_config_hash(a) != run_config_hash(b));
  CHECK(run_config_hash(a).size() == 16);
}

TEST_CASE("usage errors exit 2, domain errors exit 1") {
  CHECK(call({}).code == 2);
  CHECK(call({"nosuch"}).code == 2);
  CHECK(call({"simulate", "--process", "rtp", "--omega", "1"}).code == 2);              // missing t-end
  CHECK(call({"spectrum", "--omega", "1"}).code == 2);                                  // missing process
  CHECK(call({"spectrum", "--process", "rtp"}).code == 2);                              // missing omega
  CHECK(call({"spectrum", "--process", "rtp", "--omega", "abc"}).code == 2);            // type
  CHECK(call({"spectrum", "--process", "rtp", "--omega", "-1"}).code == 2);             // range
  CHECK(call({"spectrum", "--process", "zigzag", "--omega", "1"}).code == 2);           // wrong process
  CHECK(call({"spectrum", "--process", "rtp", "--omega", "1", "--bogus", "2"}).code == 2);
  Result r = call({"study", "--preset", "nope"});
  CHECK(r.code == 2);
  CHECK(r.err.find("TypeError") != std::string::npos);
  fs::path d = scratch("domain");
  // an unwritable output path is a domain error
  fs::path blocker = d / "file";
  atomic_write(blocker.string(), "x");
  CHECK(call({"spectrum", "--process", "sticky-bm", "--omega", "1", "--out", (blocker / "sub").string()}).code == 1);
}

TEST_CASE("help lists every flag with its default") {
  Result r = call({"--help"});
  CHECK(r.code == 0);
  for (const char* f : {"--omega", "--t-end", "--n-replicas", "--velocity-law", "--config", "hypercube"})
    CHECK(r.out.find(f) != std::string::npos);
}

TEST_CASE("config file supplies values and flags override it") {
  fs::path d = scratch("cfg");
  fs::path cfg = d / "run.json";
  atomic_write(cfg.string(), R"({"process": "sticky-bm", "omega": 2.0, "n-interior": 50})");
  RunConfig c = parse_config({"spectrum", "--config", cfg.string(), "--omega", "3"});
  CHECK(c.process == "sticky-bm");
  CHECK(*c.omega == 3.0);
  CHECK(c.n_interior == 50);
  atomic_write(cfg.string(), R"({"process": "sticky-bm", "omega": 2.0, "colour": 1})");
  CHECK(call({"spectrum", "--config", cfg.string()}).code == 2);
  atomic_write(cfg.string(), R"({"process": "sticky-bm", "omega": "two"})");
  CHECK(call({"spectrum", "--config", cfg.string()}).code == 2);
}

TEST_CASE("spectrum summary and artifacts") {
  fs::path d = scratch("spectrum");
  Result r = call({"spectrum", "--process", "sticky-bm", "--omega", "1", "--n-interior", "200", "--out", d.string()});
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["subcommand"] == "spectrum");
  CHECK(j["metrics"]["gap"].get<double>() == doctest::Approx(1.7107).epsilon(1e-3));
  CHECK(fs::exists(d / "spectrum.csv"));
  std::string csv = read_file((d / "spectrum.csv").string());
  CHECK(csv.rfind("k,re,im,config_hash,code_version\n", 0) == 0);
  CHECK(csv.find(j["config_hash"].get<std::string>()) != std::string::npos);
}

TEST_CASE("the installed binary is deterministic across runs") {
  fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string bin = LIFTLAB_CLI_PATH;
  const std::string args = " simulate --process zigzag --d 2 --t-end 200 --seed 5 --out ";
  REQUIRE(shell(bin + args + a.string() + " > /dev/null") == 0);
  REQUIRE(shell(bin + args + b.string() + " --threads 1 > /dev/null") == 0);
  for (const char* f : {"simulate-trajectory.csv", "simulate-trajectory.bin"})
    CHECK(read_file((a / f).string()) == read_file((b / f).string()));
  CHECK(shell(bin + " simulate --process rtp > /dev/null 2>&1") == 2);
}

TEST_CASE("out directory falls back to the environment variable") {
  fs::path d = scratch("env");
  setenv("LIFTLAB_OUT_DIR", d.string().c_str(), 1);
  Result r = call({"spectrum", "--process", "overdamped-1d", "--n-interior", "60"});
  unsetenv("LIFTLAB_OUT_DIR");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(d / "spectrum.json"));
}
