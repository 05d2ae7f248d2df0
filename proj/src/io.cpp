#include "ltvdw/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ltvdw {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_directory(const std::string& path) { fs::create_directories(path); }

namespace {
void append_vector_header(std::ostringstream& os, const std::string& prefix, int dim) {
  for (int i = 0; i < dim; ++i) os << "," << prefix << i;
}
void append_vector(std::ostringstream& os, const Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i) os << "," << format_double(v(i));
}
}  // namespace

std::string trace_to_csv(const DetectionTrace& trace) {
  std::ostringstream os;
  const int N = trace.steps();
  const int p = N ? static_cast<int>(trace.x[0].size()) : 0;
  const int q = N ? static_cast<int>(trace.e[0].size()) : 0;
  const int r = N ? static_cast<int>(trace.y[0].size()) : 0;

  os << "n,t";
  append_vector_header(os, "x", p);
  append_vector_header(os, "xhat", p);
  append_vector_header(os, "y", r);
  append_vector_header(os, "e", q);
  append_vector_header(os, "v", r);
  append_vector_header(os, "resid", r);
  os << ",metric,alarm\n";

  for (int n = 0; n < N; ++n) {
    os << n << "," << format_double(n * trace.dt);
    append_vector(os, trace.x[n]);
    append_vector(os, trace.x_hat[n]);
    append_vector(os, trace.y[n]);
    append_vector(os, trace.e[n]);
    append_vector(os, trace.v[n]);
    append_vector(os, trace.residual[n]);
    if (std::isnan(trace.metric[n])) {
      os << ",";
    } else {
      os << "," << format_double(trace.metric[n]);
    }
    os << "," << (trace.alarm[n] ? 1 : 0) << "\n";
  }
  return os.str();
}

std::string metric_series_to_csv(const MetricSeries& series, double dt, double threshold) {
  std::ostringstream os;
  os << "n,t,metric,threshold,alarm,alarm_event_id\n";
  for (size_t n = 0; n < series.metric.size(); ++n) {
    os << n << "," << format_double(static_cast<double>(n) * dt) << ",";
    if (!std::isnan(series.metric[n])) os << format_double(series.metric[n]);
    os << "," << format_double(threshold) << "," << (series.alarm[n] ? 1 : 0) << ","
       << series.event_id[n] << "\n";
  }
  return os.str();
}

std::string matrix_schedule_to_csv(const std::string& name,
                                   const std::vector<Eigen::MatrixXd>& seq) {
  if (seq.empty()) throw std::invalid_argument("matrix_schedule_to_csv: empty sequence");
  const int rows = static_cast<int>(seq[0].rows());
  const int cols = static_cast<int>(seq[0].cols());
  std::ostringstream os;
  os << "# matrix-schedule name=" << name << " rows=" << rows << " cols=" << cols
     << " horizon=" << seq.size() << "\n";
  os << "n";
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) os << ",m" << i << j;
  os << "\n";
  for (size_t n = 0; n < seq.size(); ++n) {
    if (seq[n].rows() != rows || seq[n].cols() != cols) {
      throw std::invalid_argument("matrix_schedule_to_csv: ragged sequence");
    }
    os << n;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) os << "," << format_double(seq[n](i, j));
    os << "\n";
  }
  return os.str();
}

std::vector<Eigen::MatrixXd> matrix_schedule_from_csv(const std::string& content,
                                                      std::string* name) {
  std::istringstream is(content);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# matrix-schedule", 0) != 0) {
    throw std::runtime_error("matrix schedule CSV: missing header line");
  }
  int rows = -1, cols = -1;
  long horizon = -1;
  {
    std::istringstream hs(line.substr(std::string("# matrix-schedule").size()));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "rows") rows = std::stoi(val);
      else if (key == "cols") cols = std::stoi(val);
      else if (key == "horizon") horizon = std::stol(val);
      else if (key == "name" && name) *name = val;
    }
  }
  if (rows <= 0 || cols <= 0 || horizon < 0) {
    throw std::runtime_error("matrix schedule CSV: malformed header");
  }
  std::getline(is, line);  // column header
  std::vector<Eigen::MatrixXd> seq;
  seq.reserve(static_cast<size_t>(horizon));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // step index
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        if (!std::getline(ls, cell, ',')) {
          throw std::runtime_error("matrix schedule CSV: truncated row");
        }
        m(i, j) = std::stod(cell);
      }
    }
    seq.push_back(std::move(m));
  }
  if (static_cast<long>(seq.size()) != horizon) {
    throw std::runtime_error("matrix schedule CSV: row count does not match horizon");
  }
  return seq;
}

std::string kv_to_text(const std::vector<std::pair<std::string, std::string>>& items) {
  std::ostringstream os;
  for (const auto& [k, v] : items) os << k << " = " << v << "\n";
  return os.str();
}

std::map<std::string, std::string> kv_from_text(const std::string& content) {
  std::map<std::string, std::string> out;
  std::istringstream is(content);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace ltvdw
