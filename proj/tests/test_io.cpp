#include <doctest.h>

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hvfwi/io.hpp"

using namespace hvfwi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hvfwi_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct Pgm {
  int width = 0, height = 0, maxval = 0;
  std::vector<unsigned char> pixels;
};

Pgm read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::string magic;
  in >> magic;
  REQUIRE(magic == "P5");
  Pgm img;
  in >> img.width >> img.height >> img.maxval;
  in.get();
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), img.pixels.size());
  REQUIRE(bool(in));
  return img;
}

}  // namespace

TEST_CASE("grid files round-trip bit-exactly") {
  TempDir dir;
  std::mt19937 rng(3);
  std::normal_distribution<double> N(1500.0, 40.0);
  VelocityModel2D m;
  m.n_x = 17;
  m.n_z = 9;
  m.d_x = 12.5;
  m.d_z = 7.25;
  m.c.resize(17 * 9);
  for (auto& v : m.c) v = N(rng);

  const auto path = dir.file("model.bin");
  write_grid_file(path, m);
  const auto back = read_grid_file(path);
  CHECK(back.n_x == m.n_x);
  CHECK(back.n_z == m.n_z);
  CHECK(back.d_x == m.d_x);
  CHECK(back.d_z == m.d_z);
  CHECK(back.c == m.c);
}

TEST_CASE("signal files round-trip bit-exactly") {
  TempDir dir;
  std::vector<double> v{0.25, -1.5, 3.75, 0.0, 1e-17, 42.0};
  const auto path = dir.file("sig.bin");
  write_signal_file(path, v, 0.125);
  CHECK(read_signal_file(path) == v);
}

TEST_CASE("gather files round-trip bit-exactly") {
  TempDir dir;
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  GatherDataset ds;
  ds.freqs_hz = {3.0, 5.0};
  ds.geometry.sources = {{100.0, 50.0}, {300.0, 50.0}};
  ds.geometry.receivers = {{0.0, 400.0}, {250.0, 400.0}, {500.0, 400.0}};
  for (int s = 0; s < 2; ++s)
    for (double f : ds.freqs_hz) {
      FrequencyGather g;
      g.freq_hz = f;
      g.source_index = s;
      g.data.resize(3);
      for (auto& d : g.data) d = {N(rng), N(rng)};
      ds.gathers.push_back(std::move(g));
    }

  const auto path = dir.file("data.bin");
  write_gather_file(path, ds);
  const auto back = read_gather_file(path);
  CHECK(back.freqs_hz == ds.freqs_hz);
  REQUIRE(back.gathers.size() == ds.gathers.size());
  for (size_t k = 0; k < ds.gathers.size(); ++k) {
    CHECK(back.gathers[k].freq_hz == ds.gathers[k].freq_hz);
    CHECK(back.gathers[k].source_index == ds.gathers[k].source_index);
    CHECK(back.gathers[k].data == ds.gathers[k].data);
  }
}

TEST_CASE("malformed headers are rejected with a config error") {
  TempDir dir;
  auto m = VelocityModel2D::constant(6, 4, 10.0, 1500.0);
  const auto path = dir.file("model.bin");
  write_grid_file(path, m);

  SUBCASE("unknown key") {
    std::ofstream(path + ".json")
        << R"({"dtype":"f64","shape":[4,6],"dx_m":10,"dz_m":10,"byte_order":"little","extra":1})";
    CHECK_THROWS_AS(read_grid_file(path), ConfigError);
  }
  SUBCASE("wrong dtype") {
    std::ofstream(path + ".json")
        << R"({"dtype":"f32","shape":[4,6],"dx_m":10,"dz_m":10,"byte_order":"little"})";
    CHECK_THROWS_AS(read_grid_file(path), ConfigError);
  }
  SUBCASE("missing field") {
    std::ofstream(path + ".json") << R"({"dtype":"f64","shape":[4,6],"dx_m":10})";
    CHECK_THROWS_AS(read_grid_file(path), ConfigError);
  }
  SUBCASE("not json") {
    std::ofstream(path + ".json") << "not json at all {";
    CHECK_THROWS_AS(read_grid_file(path), ConfigError);
  }
  SUBCASE("payload shape mismatch") {
    std::ofstream(path + ".json")
        << R"({"dtype":"f64","shape":[40,60],"dx_m":10,"dz_m":10,"byte_order":"little"})";
    CHECK_THROWS_AS(read_grid_file(path), ConfigError);
  }
  SUBCASE("missing sidecar") {
    fs::remove(path + ".json");
    CHECK_THROWS_AS(read_grid_file(path), IoError);
  }
}

TEST_CASE("image export maps constant grids to a flat image") {
  TempDir dir;
  auto m = VelocityModel2D::constant(12, 8, 10.0, 1500.0);
  const auto path = dir.file("flat.pgm");
  export_image(m, path);
  const auto img = read_pgm(path);
  CHECK(img.width == 12);
  CHECK(img.height == 8);
  for (auto p : img.pixels) CHECK(p == img.pixels[0]);
}

TEST_CASE("image export preserves monotone gradients") {
  TempDir dir;
  auto m = VelocityModel2D::constant(16, 6, 10.0, 1500.0);
  for (int iz = 0; iz < m.n_z; ++iz)
    for (int ix = 0; ix < m.n_x; ++ix) m.at(iz, ix) = 1400.0 + 20.0 * ix;
  const auto path = dir.file("ramp.pgm");
  export_image(m, path);
  const auto img = read_pgm(path);
  for (int iz = 0; iz < img.height; ++iz)
    for (int ix = 0; ix + 1 < img.width; ++ix)
      CHECK(img.pixels[iz * img.width + ix] <= img.pixels[iz * img.width + ix + 1]);
}
