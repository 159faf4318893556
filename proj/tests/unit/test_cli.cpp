#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "ctxsched/cli.hpp"
#include "ctxsched/csv.hpp"
#include "test_util.hpp"

using namespace ctxsched;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctxsched");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config() { return (testing::data_dir() / "configs" / "robot.toml").string(); }
std::string poc() { return (testing::data_dir() / "timelines" / "poc.json").string(); }

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("validate") {
  CHECK(run({"validate", "--config", config()}).code == 0);
  CHECK(run({"validate", "--config", config(), "--timeline", poc()}).code == 0);

  const auto dir = testing::temp_dir("cli-validate");
  const auto bad = write_file(dir / "bad.toml", "[[modules]]\nid = \"a\"\npriority = 0\nscore_expr = \"1\"\n");
  const auto r = run({"validate", "--config", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("priority") != std::string::npos);
  CHECK(run({"validate", "--config", (dir / "missing.toml").string()}).code == 1);

  const auto tl = write_file(dir / "tl.json",
                             R"({"name": "x", "duration_ms": 10, "entries": [{"t_ms": 0, "stream": "radar", "payload": {}}]})");
  CHECK(run({"validate", "--config", config(), "--timeline", tl.string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"replay", "--config", config()}).code == 1);
  CHECK(run({"replay", "--config", config(), "--timeline", poc(), "--variant", "fifo", "--out",
             "/tmp/x"})
            .code == 1);
  CHECK(run({"compare", "--config", config(), "--timeline", poc(), "--processors", "0"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("replay, export and compare") {
  const auto dir = testing::temp_dir("cli-run");
  auto r = run({"replay", "--config", config(), "--timeline", poc(), "--variant", "cfs_ca", "--out",
                (dir / "replay").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("cfs_ca") != std::string::npos);
  for (const char* f : {"weights.csv", "shares.csv", "jobs.csv", "summary.csv"})
    CHECK(fs::exists(dir / "replay" / f));
  CHECK_FALSE(fs::exists(dir / "replay" / "trace.csv"));

  r = run({"export", "--config", config(), "--timeline", poc(), "--variant", "rt_ca", "--out",
           (dir / "export").string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "export" / "trace.csv"));

  r = run({"compare", "--config", config(), "--timeline", poc(), "--out", (dir / "cmp").string()});
  CHECK(r.code == 0);
  for (const char* v : {"baseline", "cfs_ca", "rt_ca"}) {
    CHECK(r.out.find(v) != std::string::npos);
    CHECK(fs::exists(dir / "cmp" / v / "weights.csv"));
  }
  CHECK(read_csv(dir / "cmp" / "summary.csv").size() == 13);

  // Runtime failure: output directory is a file.
  write_file(dir / "file", "x");
  r = run({"replay", "--config", config(), "--timeline", poc(), "--out", (dir / "file").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  fs::remove_all(dir);
}

TEST_CASE("live refuses without permission and drives a cgroup tree with it") {
  const auto dir = testing::temp_dir("cli-live");
  const auto tl = write_file(dir / "tl.json", R"({"name": "x", "duration_ms": 300, "entries": [
    {"t_ms": 0, "stream": "imu", "payload": {"accel": [0, 0, 0]}},
    {"t_ms": 0, "stream": "slam/tracking_lost", "payload": {"lost": false}},
    {"t_ms": 0, "stream": "side_camera", "payload": {"signs": 0}},
    {"t_ms": 200, "stream": "imu", "payload": {"accel": [2, 0, 0]}}]})");
  const std::vector<std::string> base = {"live", "--config", config(), "--timeline", tl.string(),
                                         "--cgroup-root", dir.string()};
  auto r = run(base);
  CHECK(r.code == 1);
  CHECK(r.err.find("--i-have-cgroup-permissions") != std::string::npos);

  for (const char* m : {"slam", "sign", "speech"}) {
    fs::create_directories(dir / m);
    write_file(dir / m / "cpu.max", "max 100000\n");
  }
  auto permitted = base;
  permitted.push_back("--i-have-cgroup-permissions");
  r = run(permitted);
  CHECK(r.code == 0);
  std::ifstream in(dir / "speech" / "cpu.max");
  std::string content;
  std::getline(in, content);
  CHECK(content == "0 100000");

  auto baseline = permitted;
  baseline.insert(baseline.end(), {"--variant", "baseline"});
  CHECK(run(baseline).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("installed binary exit codes") {
  const std::string bin = CTXSCHED_CLI_PATH;
  const int ok = std::system((bin + " validate --config " + config() + " > /dev/null").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
  const int bad = std::system((bin + " validate --config /nonexistent.toml 2> /dev/null").c_str());
  CHECK(WEXITSTATUS(bad) == 1);
}
