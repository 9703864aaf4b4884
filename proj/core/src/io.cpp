#include "hvfwi/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hvfwi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void byteswap_doubles(std::vector<double>& v) {
  for (double& d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    bits = __builtin_bswap64(bits);
    std::memcpy(&d, &bits, 8);
  }
}

// Files are little-endian on disk regardless of host.
void to_disk_order(std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::big) byteswap_doubles(v);
}
void from_disk_order(std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::big) byteswap_doubles(v);
}

std::vector<double> read_payload(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open payload file: " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes % 8 != 0) throw ConfigError("payload of " + path + " is not a whole number of binary64 values");
  in.seekg(0);
  std::vector<double> v(bytes / 8);
  in.read(reinterpret_cast<char*>(v.data()), bytes);
  if (!in) throw IoError("short read on payload file: " + path);
  from_disk_order(v);
  return v;
}

json read_header(const std::string& path) {
  const std::string hpath = path + ".json";
  std::ifstream in(hpath);
  if (!in) throw IoError("cannot open header sidecar: " + hpath);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed header " + hpath + ": " + e.what());
  }
  return j;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

void require_field(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError("missing field '" + key + "' in " + context);
}

json grid_header(int n_z, int n_x, double dx, double dz) {
  return json{{"dtype", "f64"},
              {"shape", {n_z, n_x}},
              {"dx_m", dx},
              {"dz_m", dz},
              {"byte_order", "little"}};
}

}  // namespace

void atomic_write_bytes(const std::string& path, const void* data, size_t size) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("short write on " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed for " + path + ": " + ec.message());
}

void atomic_write_text(const std::string& path, const std::string& text) {
  atomic_write_bytes(path, text.data(), text.size());
}

void write_grid_file(const std::string& path, const VelocityModel2D& model) {
  std::vector<double> payload = model.c;
  to_disk_order(payload);
  atomic_write_bytes(path, payload.data(), payload.size() * 8);
  atomic_write_text(path + ".json",
                    grid_header(model.n_z, model.n_x, model.d_x, model.d_z).dump(2) + "\n");
}

VelocityModel2D read_grid_file(const std::string& path) {
  const json h = read_header(path);
  check_keys(h, {"dtype", "shape", "dx_m", "dz_m", "byte_order"}, path + ".json");
  for (const char* k : {"dtype", "shape", "dx_m", "dz_m", "byte_order"})
    require_field(h, k, path + ".json");
  if (h["dtype"] != "f64") throw ConfigError("field 'dtype' must be \"f64\" in " + path + ".json");
  if (h["byte_order"] != "little")
    throw ConfigError("field 'byte_order' must be \"little\" in " + path + ".json");
  if (!h["shape"].is_array() || h["shape"].size() != 2)
    throw ConfigError("field 'shape' must be [n_z, n_x] in " + path + ".json");

  VelocityModel2D m;
  m.n_z = h["shape"][0].get<int>();
  m.n_x = h["shape"][1].get<int>();
  m.d_x = h["dx_m"].get<double>();
  m.d_z = h["dz_m"].get<double>();
  m.c = read_payload(path);
  if (m.c.size() != static_cast<size_t>(m.n_x) * m.n_z)
    throw ConfigError("field 'shape' disagrees with payload length for " + path);
  return m;
}

void write_signal_file(const std::string& path, const std::vector<double>& values, double dx) {
  VelocityModel2D m;
  m.n_z = 1;
  m.n_x = static_cast<int>(values.size());
  m.d_x = dx;
  m.d_z = dx;
  m.c = values;
  write_grid_file(path, m);
}

std::vector<double> read_signal_file(const std::string& path) {
  return read_grid_file(path).c;
}

void write_gather_file(const std::string& path, const GatherDataset& dataset) {
  const size_t n_src = dataset.geometry.sources.size();
  const size_t n_freq = dataset.freqs_hz.size();
  const size_t n_rec = dataset.geometry.receivers.size();
  if (dataset.gathers.size() != n_src * n_freq)
    throw ConfigError("gather count does not match sources x frequencies");

  std::vector<double> payload(2 * n_src * n_freq * n_rec, 0.0);
  for (size_t s = 0; s < n_src; ++s) {
    for (size_t f = 0; f < n_freq; ++f) {
      const FrequencyGather* g = nullptr;
      for (const auto& cand : dataset.gathers)
        if (cand.source_index == static_cast<int>(s) &&
            std::abs(cand.freq_hz - dataset.freqs_hz[f]) <=
                1e-9 * (1.0 + dataset.freqs_hz[f])) {
          g = &cand;
          break;
        }
      if (!g) throw ConfigError("missing gather for source/frequency pair");
      if (g->data.size() != n_rec) throw ConfigError("gather receiver count mismatch");
      for (size_t r = 0; r < n_rec; ++r) {
        const size_t base = 2 * ((s * n_freq + f) * n_rec + r);
        payload[base] = g->data[r].real();
        payload[base + 1] = g->data[r].imag();
      }
    }
  }
  to_disk_order(payload);
  atomic_write_bytes(path, payload.data(), payload.size() * 8);

  json srcs = json::array(), recs = json::array();
  for (const auto& s : dataset.geometry.sources) srcs.push_back({s[0], s[1]});
  for (const auto& r : dataset.geometry.receivers) recs.push_back({r[0], r[1]});
  const json h{{"freqs_hz", dataset.freqs_hz},
               {"sources", srcs},
               {"receivers", recs},
               {"layout", "source-major, freq-major, receiver-minor, complex interleaved re/im"}};
  atomic_write_text(path + ".json", h.dump(2) + "\n");
}

GatherDataset read_gather_file(const std::string& path) {
  const json h = read_header(path);
  check_keys(h, {"freqs_hz", "sources", "receivers", "layout"}, path + ".json");
  for (const char* k : {"freqs_hz", "sources", "receivers", "layout"})
    require_field(h, k, path + ".json");

  GatherDataset d;
  d.freqs_hz = h["freqs_hz"].get<std::vector<double>>();
  for (const auto& s : h["sources"]) d.geometry.sources.push_back({s[0], s[1]});
  for (const auto& r : h["receivers"]) d.geometry.receivers.push_back({r[0], r[1]});

  const size_t n_src = d.geometry.sources.size();
  const size_t n_freq = d.freqs_hz.size();
  const size_t n_rec = d.geometry.receivers.size();
  const auto payload = read_payload(path);
  if (payload.size() != 2 * n_src * n_freq * n_rec)
    throw ConfigError("header of " + path + " disagrees with payload length (field 'receivers'/'sources'/'freqs_hz')");

  for (size_t s = 0; s < n_src; ++s)
    for (size_t f = 0; f < n_freq; ++f) {
      FrequencyGather g;
      g.freq_hz = d.freqs_hz[f];
      g.source_index = static_cast<int>(s);
      g.data.resize(n_rec);
      for (size_t r = 0; r < n_rec; ++r) {
        const size_t base = 2 * ((s * n_freq + f) * n_rec + r);
        g.data[r] = {payload[base], payload[base + 1]};
      }
      d.gathers.push_back(std::move(g));
    }
  return d;
}

void export_image(const VelocityModel2D& grid, const std::string& out_path) {
  double lo = grid.c[0], hi = grid.c[0];
  for (double v : grid.c) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi > lo ? hi - lo : 1.0;

  std::string bytes;
  bytes += "P5\n" + std::to_string(grid.n_x) + " " + std::to_string(grid.n_z) + "\n255\n";
  for (double v : grid.c) {
    const int pix = static_cast<int>(std::lround((v - lo) / range * 255.0));
    bytes += static_cast<char>(std::clamp(pix, 0, 255));
  }
  atomic_write_bytes(out_path, bytes.data(), bytes.size());
  atomic_write_text(out_path + ".json", json{{"min", lo}, {"max", hi}}.dump(2) + "\n");
}

void write_scan_csv(const std::string& path, const ScanResult& scan) {
  std::ostringstream out;
  out.precision(17);
  out << scan.parameter_name;
  for (const auto& [name, curve] : scan.curves) out << "," << name;
  out << "\n";
  for (size_t i = 0; i < scan.parameter.size(); ++i) {
    out << scan.parameter[i];
    for (const auto& [name, curve] : scan.curves) out << "," << curve[i];
    out << "\n";
  }
  atomic_write_text(path, out.str());
}

}  // namespace hvfwi
