#include "cbflab/snapshot_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cbflab/error.hpp"

namespace cbflab {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double x = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last) throw Error(ErrorKind::io_error, "cannot parse number '" + token + "'");
  return x;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& c : split(line)) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_snapshot(const std::filesystem::path& path, const SpectralVelocityField& u, double time) {
  const TorusDomain& dom = u.domain();
  nlohmann::json hdr;
  hdr["d"] = dom.dim();
  hdr["L"] = dom.half_period();
  hdr["N"] = dom.modes_per_axis();
  hdr["dealias"] = dom.dealias_fraction();
  hdr["time"] = time;

  std::ofstream out = open_out(path);
  out << "# " << hdr.dump() << '\n';
  static const char* axes[] = {"kx", "ky", "kz"};
  const int d = dom.dim();
  for (int a = 0; a < d; ++a) out << (a ? "," : "") << axes[a];
  for (int c = 0; c < d; ++c) out << ",re_u" << c + 1 << ",im_u" << c + 1;
  out << '\n';
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto& m = dom.mode(i);
    for (int a = 0; a < d; ++a) out << (a ? "," : "") << m[a];
    for (int c = 0; c < d; ++c) {
      const cplx z = u.component(c)[i];
      out << ',' << format_double(z.real()) << ',' << format_double(z.imag());
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw Error(ErrorKind::io_error, "snapshot header missing in " + path.string());
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io_error, std::string("bad snapshot header: ") + e.what());
  }
  TorusDomain dom(hdr.at("d").get<int>(), hdr.at("L").get<double>(), hdr.at("N").get<int>(),
                  hdr.at("dealias").get<double>());
  const int d = dom.dim();
  std::getline(in, line);  // column names
  std::vector<cplx> coeffs(dom.size() * static_cast<std::size_t>(d));
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != static_cast<std::size_t>(3 * d))
      throw Error(ErrorKind::shape_mismatch, "snapshot row has " + std::to_string(cells.size()) + " cells");
    std::array<int, 3> m{0, 0, 0};
    for (int a = 0; a < d; ++a) m[a] = static_cast<int>(parse_double(cells[a]));
    const std::size_t idx = dom.index_of(m);
    if (idx >= dom.size()) throw Error(ErrorKind::shape_mismatch, "snapshot mode outside the domain");
    for (int c = 0; c < d; ++c)
      coeffs[c * dom.size() + idx] = cplx(parse_double(cells[d + 2 * c]), parse_double(cells[d + 2 * c + 1]));
    ++rows;
  }
  if (rows != dom.size()) throw Error(ErrorKind::shape_mismatch, "snapshot row count does not match N^d");
  return Snapshot{SpectralVelocityField(dom, std::move(coeffs)), hdr.at("time").get<double>()};
}

}  // namespace cbflab
