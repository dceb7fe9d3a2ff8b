#pragma once

// Text serialization shared by every artifact writer: shortest round-trip
// doubles, CSV tables and the spectral snapshot format.

#include <filesystem>
#include <string>
#include <vector>

#include "cbflab/spectral_domain.hpp"

namespace cbflab {

/// Shortest decimal string that parses back to exactly x.
std::string format_double(double x);
/// Strict parse of a full token; throws io-error on trailing junk.
double parse_double(const std::string& token);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

struct Snapshot {
  SpectralVelocityField field;
  double time = 0.0;
};

/// First line is "# " followed by a JSON header {d, L, N, dealias, time};
/// then one row per stored mode: kx, ky[, kz], re_u1, im_u1, ...
void write_snapshot(const std::filesystem::path& path, const SpectralVelocityField& u, double time);
Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace cbflab
