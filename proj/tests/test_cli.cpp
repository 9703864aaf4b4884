#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvfwi/io.hpp"

using namespace hvfwi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hvfwi_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out = dir.file("stdout.txt");
  const std::string cmd =
      std::string(HVFWI_CLI_PATH) + " " + args + " > " + out + " 2> " + dir.file("stderr.txt");
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.stdout_text = ss.str();
  return r;
}

json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last);
}

}  // namespace

TEST_CASE("hv-dist reports zero distance for identical signals") {
  TempDir dir;
  std::vector<double> v(65);
  for (int i = 0; i <= 64; ++i) v[i] = std::sin(0.1 * i);
  write_signal_file(dir.file("a.bin"), v);
  write_signal_file(dir.file("b.bin"), v);
  std::ofstream(dir.file("cfg.json")) << json{{"signal_a", dir.file("a.bin")},
                                              {"signal_b", dir.file("b.bin")},
                                              {"hv", {{"kappa", 1.0}, {"lambda", 1.0},
                                                      {"epsilon", 1e-3}}}};
  const auto r = run_cli(dir, "hv-dist --config " + dir.file("cfg.json"));
  REQUIRE(r.exit_code == 0);
  const auto summary = last_json_line(r.stdout_text);
  CHECK(summary["distance"].get<double>() <= 1e-8);
  CHECK(summary["converged"].get<bool>());
}

TEST_CASE("w2-dist runs and reports a nonnegative squared distance") {
  TempDir dir;
  std::vector<double> a(32), b(32);
  for (int i = 0; i < 32; ++i) {
    a[i] = std::exp(-0.05 * (i - 10) * (i - 10));
    b[i] = std::exp(-0.05 * (i - 20) * (i - 20));
  }
  write_signal_file(dir.file("a.bin"), a);
  write_signal_file(dir.file("b.bin"), b);
  std::ofstream(dir.file("cfg.json"))
      << json{{"signal_a", dir.file("a.bin")}, {"signal_b", dir.file("b.bin")}};
  const auto r = run_cli(dir, "w2-dist --config " + dir.file("cfg.json"));
  REQUIRE(r.exit_code == 0);
  const auto summary = last_json_line(r.stdout_text);
  CHECK(summary["squared"].get<double>() > 0.0);
}

TEST_CASE("unknown config keys exit with code 2") {
  TempDir dir;
  std::ofstream(dir.file("cfg.json")) << R"({"signal_a":"x","mystery_key":1})";
  const auto r = run_cli(dir, "hv-dist --config " + dir.file("cfg.json"));
  CHECK(r.exit_code == 2);
}

TEST_CASE("malformed config documents exit with code 2") {
  TempDir dir;
  std::ofstream(dir.file("cfg.json")) << "{ this is not json";
  const auto r = run_cli(dir, "hv-dist --config " + dir.file("cfg.json"));
  CHECK(r.exit_code == 2);
}

TEST_CASE("missing input files exit with code 1") {
  TempDir dir;
  std::ofstream(dir.file("cfg.json")) << json{{"signal_a", dir.file("absent.bin")},
                                              {"signal_b", dir.file("absent.bin")}};
  const auto r = run_cli(dir, "hv-dist --config " + dir.file("cfg.json"));
  CHECK(r.exit_code == 1);
}

TEST_CASE("corrupt signal headers exit with code 2") {
  TempDir dir;
  std::vector<double> v(16, 1.0);
  write_signal_file(dir.file("a.bin"), v);
  write_signal_file(dir.file("b.bin"), v);
  std::ofstream(dir.file("a.bin.json")) << R"({"dtype":"i8","shape":[1,16]})";
  std::ofstream(dir.file("cfg.json"))
      << json{{"signal_a", dir.file("a.bin")}, {"signal_b", dir.file("b.bin")}};
  const auto r = run_cli(dir, "hv-dist --config " + dir.file("cfg.json"));
  CHECK(r.exit_code == 2);
}

TEST_CASE("forward then score executes end to end") {
  TempDir dir;
  auto model = VelocityModel2D::constant(24, 24, 20.0, 1500.0);
  write_grid_file(dir.file("model.bin"), model);
  std::ofstream(dir.file("fwd.json"))
      << json{{"model", dir.file("model.bin")},
              {"freqs_hz", {5.0}},
              {"geometry",
               {{"sources", {{100.0, 40.0}}},
                {"receivers", {{100.0, 420.0}, {300.0, 420.0}}}}},
              {"pml", {{"width_cells", 6}}},
              {"out", dir.file("data.bin")}};
  const auto fwd = run_cli(dir, "forward --config " + dir.file("fwd.json"));
  REQUIRE(fwd.exit_code == 0);
  CHECK(fs::exists(dir.file("data.bin")));

  std::ofstream(dir.file("score.json"))
      << json{{"model", dir.file("model.bin")}, {"reference", dir.file("model.bin")}};
  const auto sc = run_cli(dir, "score --config " + dir.file("score.json"));
  REQUIRE(sc.exit_code == 0);
  const auto summary = last_json_line(sc.stdout_text);
  CHECK(summary["rmse"].get<double>() == 0.0);
}
