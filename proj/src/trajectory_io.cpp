#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "epifed/epidemics.hpp"
#include "epifed/error.hpp"

namespace epifed {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void write_trajectory(const Trajectory& tr, std::ostream& out, const std::string& provenance) {
  out << "#meta model=" << to_string(tr.model().variant)
      << " params=" << tr.model().parameter_string() << " n=" << tr.n_nodes()
      << " dt=" << shortest(tr.dt()) << " seed=" << tr.seed() << " graph=" << tr.graph_hash()
      << '\n';
  if (!provenance.empty()) {
    std::istringstream lines(provenance);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  std::string row;
  char tbuf[64];
  for (std::size_t k = 0; k < tr.n_samples(); ++k) {
    std::snprintf(tbuf, sizeof tbuf, "%.6f", tr.time(k));
    row.assign(tbuf);
    for (std::size_t i = 0; i < tr.n_nodes(); ++i) {
      row += ',';
      row += static_cast<char>('0' + tr.state(k, i));
    }
    row += '\n';
    out << row;
  }
}

Trajectory read_trajectory(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line.rfind("#meta ", 0) != 0)
    throw ParseError("trajectory must start with a '#meta' record", line_no);
  std::map<std::string, std::string> meta;
  {
    std::istringstream fields(line.substr(6));
    std::string field;
    while (fields >> field) {
      auto eq = field.find('=');
      if (eq == std::string::npos) throw ParseError("bad metadata field '" + field + "'", 1);
      meta[field.substr(0, eq)] = field.substr(eq + 1);
    }
  }
  for (const char* key : {"model", "params", "n", "dt", "seed", "graph"})
    if (!meta.count(key)) throw ParseError(std::string("metadata lacks '") + key + "'", 1);

  ModelSpec model = ModelSpec::parse(meta["model"], meta["params"]);
  std::size_t n = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  auto num = [](const std::string& s, auto& v) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw ParseError("bad numeric metadata '" + s + "'", 1);
  };
  num(meta["n"], n);
  num(meta["dt"], dt);
  num(meta["seed"], seed);
  if (n == 0 || !(dt > 0.0)) throw ParseError("metadata has non-positive n or dt", 1);

  std::vector<std::uint8_t> states;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 't,s_1,...,s_N'", line_no);
    double t = 0.0;
    auto [tp, tec] = std::from_chars(line.data(), line.data() + comma, t);
    if (tec != std::errc{} || tp != line.data() + comma) throw ParseError("bad time value", line_no);
    if (std::abs(t - static_cast<double>(k) * dt) > 5e-7 + 1e-12 * std::abs(t))
      throw ParseError("sample time does not match k * dt", line_no);
    std::size_t count = 0;
    for (std::size_t pos = comma; pos < line.size();) {
      if (line[pos] != ',') throw ParseError("expected ','", line_no);
      std::size_t end = line.find(',', pos + 1);
      if (end == std::string::npos) end = line.size();
      unsigned value = 0;
      auto [vp, vec] = std::from_chars(line.data() + pos + 1, line.data() + end, value);
      if (vec != std::errc{} || vp != line.data() + end || value > 255)
        throw ParseError("bad state code", line_no);
      states.push_back(static_cast<std::uint8_t>(value));
      ++count;
      pos = end;
    }
    if (count != n)
      throw ParseError("expected " + std::to_string(n) + " states, got " + std::to_string(count),
                       line_no);
    ++k;
  }
  if (k == 0) throw ParseError("trajectory has no samples", line_no);
  try {
    return Trajectory(model, meta["graph"], dt, seed, n, std::move(states));
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_no);
  }
}

void write_trajectory_file(const Trajectory& tr, const std::string& path,
                           const std::string& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_trajectory(tr, out, provenance);
}

Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trajectory '" + path + "'");
  return read_trajectory(in);
}

}  // namespace epifed
