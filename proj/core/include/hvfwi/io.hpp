#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hvfwi/harness.hpp"
#include "hvfwi/velocity_model.hpp"

namespace hvfwi {

/// Grid files are raw little-endian IEEE-754 binary64 payloads, row-major,
/// with a structured-text sidecar header at `path + ".json"`.  Round-trips
/// are bit-exact; all writes are atomic (temp + rename).
void write_grid_file(const std::string& path, const VelocityModel2D& model);
VelocityModel2D read_grid_file(const std::string& path);

/// 1D signals ride the same format with shape [1, n].
void write_signal_file(const std::string& path, const std::vector<double>& values,
                       double dx = 1.0);
std::vector<double> read_signal_file(const std::string& path);

struct GatherDataset {
  std::vector<double> freqs_hz;
  AcquisitionGeometry geometry;
  std::vector<FrequencyGather> gathers;  // source-major, freq-minor order
};

/// Gather files: header sidecar plus raw interleaved re/im binary64 payload,
/// source-major, freq-major, receiver-minor.
void write_gather_file(const std::string& path, const GatherDataset& dataset);
GatherDataset read_gather_file(const std::string& path);

/// 8-bit grayscale P5 with linear min-max scaling; the scaling constants go
/// to a sidecar so values can be reconstructed to within 1/255 of the range.
void export_image(const VelocityModel2D& grid, const std::string& out_path);

void write_scan_csv(const std::string& path, const ScanResult& scan);

void atomic_write_bytes(const std::string& path, const void* data, size_t size);
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace hvfwi
