#include "agbp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "agbp/dynamics.hpp"
#include "agbp/error.hpp"
#include "agbp/graph.hpp"

namespace agbp {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double value) {
  std::ostringstream ss;
  ss << std::setprecision(17) << value;
  return ss.str();
}

std::vector<Entry> read_matrix_market(std::istream& in, const std::string& source,
                                      std::size_t& rows, std::size_t& cols) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
  ++lineno;
  std::istringstream header(lower(line));
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix") {
    throw ParseError(source, lineno, "missing '%%MatrixMarket matrix' banner");
  }
  if (format != "coordinate") throw ParseError(source, lineno, "only coordinate format is supported");
  if (field != "real" && field != "double" && field != "integer") {
    throw ParseError(source, lineno, "unsupported field '" + field + "'");
  }
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") {
    throw ParseError(source, lineno, "unsupported symmetry '" + symmetry + "'");
  }

  std::size_t declared = 0;
  bool have_size = false;
  std::vector<Entry> entries;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '%') continue;
    std::istringstream ss(t);
    std::string a, b, c, extra;
    ss >> a >> b >> c >> extra;
    if (!have_size) {
      if (!parse_number(a, rows) || !parse_number(b, cols) || !parse_number(c, declared) ||
          !extra.empty()) {
        throw ParseError(source, lineno, "expected size line 'rows cols nonzeros'");
      }
      have_size = true;
      continue;
    }
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!parse_number(a, i) || !parse_number(b, j) || !parse_number(c, v) || !extra.empty()) {
      throw ParseError(source, lineno, "expected entry 'row col value'");
    }
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw ParseError(source, lineno, "entry index outside the declared size");
    }
    if (!seen.insert({i, j}).second) {
      throw ParseError(source, lineno, "duplicate entry (" + std::to_string(i) + "," +
                                           std::to_string(j) + ")");
    }
    entries.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) {
      if (!seen.insert({j, i}).second) {
        throw ParseError(source, lineno, "symmetric entry conflicts with an existing entry");
      }
      entries.push_back({j - 1, i - 1, v});
    }
  }
  if (!have_size) throw ParseError(source, lineno, "missing size line");
  std::size_t lines_read = 0;
  for (const auto& e : entries) lines_read += (!symmetric || e.row >= e.col) ? 1 : 0;
  if (lines_read != declared) {
    throw ParseError(source, lineno, "declared " + std::to_string(declared) + " entries, found " +
                                         std::to_string(lines_read));
  }
  return entries;
}

void write_matrix_market(std::ostream& out, const LinearModel& model) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << model.rows() << ' ' << model.cols() << ' ' << model.nonzeros() << '\n';
  for (const Entry& e : model.entries()) {
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << format_double(e.value) << '\n';
  }
}

LinearModel load_model(const std::filesystem::path& matrix_path,
                       const std::filesystem::path& observations_path) {
  std::size_t rows = 0, cols = 0;
  std::vector<Entry> entries;
  {
    std::ifstream in = open_input(matrix_path);
    entries = read_matrix_market(in, matrix_path.string(), rows, cols);
  }

  std::ifstream in = open_input(observations_path);
  const std::string source = observations_path.string();
  std::vector<double> z(rows, 0.0), v(rows, 0.0);
  std::vector<bool> have(rows, false);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t, ',');
    if (!header) {
      if (cells.size() != 3 || cells[0] != "row" || cells[1] != "z" || cells[2] != "v") {
        throw ParseError(source, lineno, "expected header 'row,z,v'");
      }
      header = true;
      continue;
    }
    std::size_t row = 0;
    double zi = 0.0, vi = 0.0;
    if (cells.size() != 3 || !parse_number(cells[0], row) || !parse_number(cells[1], zi) ||
        !parse_number(cells[2], vi)) {
      throw ParseError(source, lineno, "expected 'row,z,v' with numeric fields");
    }
    if (row >= rows) {
      throw ParseError(source, lineno, "row " + std::to_string(row) + " out of range (matrix has " +
                                           std::to_string(rows) + " rows)");
    }
    if (have[row]) throw ParseError(source, lineno, "row " + std::to_string(row) + " listed twice");
    if (!(vi > 0.0) || !std::isfinite(vi)) {
      throw ParseError(source, lineno, "variance must be positive and finite");
    }
    if (!std::isfinite(zi)) throw ParseError(source, lineno, "observation must be finite");
    z[row] = zi;
    v[row] = vi;
    have[row] = true;
  }
  if (!header) throw ParseError(source, lineno, "missing header 'row,z,v'");
  for (std::size_t i = 0; i < rows; ++i) {
    if (!have[i]) throw ParseError(source, 0, "no observation for row " + std::to_string(i));
  }
  try {
    return LinearModel(rows, cols, std::move(entries), std::move(z), std::move(v));
  } catch (const ValidationError& e) {
    throw ParseError(matrix_path.string(), 0, e.what());
  }
}

void save_model(const LinearModel& model, const ModelPaths& paths) {
  {
    std::ofstream out = open_output(paths.matrix);
    write_matrix_market(out, model);
  }
  std::ofstream out = open_output(paths.observations);
  out << "row,z,v\n";
  for (std::size_t i = 0; i < model.rows(); ++i) {
    out << i << ',' << format_double(model.observations()[i]) << ','
        << format_double(model.variances()[i]) << '\n';
  }
}

ClusterPartition load_partition(const std::filesystem::path& path, std::size_t variables) {
  std::ifstream in = open_input(path);
  const std::string source = path.string();
  std::vector<std::size_t> assignment(variables, 0);
  std::vector<bool> have(variables, false);
  std::size_t clusters = 0;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t, ',');
    if (!header) {
      if (cells.size() != 2 || cells[0] != "variable" || cells[1] != "cluster") {
        throw ParseError(source, lineno, "expected header 'variable,cluster'");
      }
      header = true;
      continue;
    }
    std::size_t var = 0, cluster = 0;
    if (cells.size() != 2 || !parse_number(cells[0], var) || !parse_number(cells[1], cluster)) {
      throw ParseError(source, lineno, "expected 'variable,cluster' integers");
    }
    if (var >= variables) throw ParseError(source, lineno, "variable index out of range");
    if (have[var]) throw ParseError(source, lineno, "variable listed twice");
    assignment[var] = cluster;
    have[var] = true;
    clusters = std::max(clusters, cluster + 1);
  }
  for (std::size_t j = 0; j < variables; ++j) {
    if (!have[j]) throw ParseError(source, 0, "no cluster for variable " + std::to_string(j));
  }
  try {
    return ClusterPartition(clusters, std::move(assignment));
  } catch (const ValidationError& e) {
    throw ParseError(source, 0, e.what());
  }
}

void save_partition(const ClusterPartition& partition, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "variable,cluster\n";
  for (std::size_t j = 0; j < partition.variable_count(); ++j) {
    out << j << ',' << partition.cluster_of(j) << '\n';
  }
}

void write_classification_csv(std::ostream& out, const FactorClassification& classification) {
  out << "factor,kind,cluster\n";
  for (std::size_t f = 0; f < classification.kind.size(); ++f) {
    out << f << ',' << (classification.is_tie(f) ? "tie" : "internal") << ','
        << classification.home_cluster[f] << '\n';
  }
}

std::vector<ObservationEvent> load_events(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string source = path.string();
  std::vector<ObservationEvent> events;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t, ',');
    if (!header) {
      if (cells.size() != 4 || cells[0] != "time" || cells[1] != "factor" || cells[2] != "z" ||
          cells[3] != "v") {
        throw ParseError(source, lineno, "expected header 'time,factor,z,v'");
      }
      header = true;
      continue;
    }
    ObservationEvent ev;
    if (cells.size() != 4 || !parse_number(cells[0], ev.time) || !parse_number(cells[1], ev.factor) ||
        !parse_number(cells[2], ev.observation) || !parse_number(cells[3], ev.variance)) {
      throw ParseError(source, lineno, "expected 'time,factor,z,v' numbers");
    }
    if (!std::isfinite(ev.time) || !std::isfinite(ev.observation)) {
      throw ParseError(source, lineno, "time and z must be finite");
    }
    if (!(ev.variance > 0.0) || !std::isfinite(ev.variance)) {
      throw ParseError(source, lineno, "variance must be positive and finite");
    }
    if (!events.empty() && ev.time < events.back().time) {
      throw ParseError(source, lineno, "events must be sorted by time");
    }
    events.push_back(ev);
  }
  if (!header) throw ParseError(source, 0, "missing header 'time,factor,z,v'");
  return events;
}

}  // namespace agbp
