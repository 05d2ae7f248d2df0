#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ltvdw/detector.hpp"
#include "ltvdw/system.hpp"

namespace ltvdw {

// CSV and small-file helpers. All writes are atomic (temp file + rename)
// and all doubles are printed with "%.17g" so identical runs produce
// byte-identical files.

std::string format_double(double v);

/// Writes `content` to `path` via a temporary file in the same directory.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

/// Trace CSV: one row per step with header
/// n,t,x0..,xhat0..,y0..,e0..,v0..,resid0..,metric,alarm
std::string trace_to_csv(const DetectionTrace& trace);

/// Metric CSV: n,t,metric,threshold,alarm,alarm_event_id
std::string metric_series_to_csv(const MetricSeries& series, double dt, double threshold);

/// Matrix-schedule CSV. First line is
///   # matrix-schedule name=<name> rows=<r> cols=<c> horizon=<N>
/// followed by a header and one row per step: n, then row-major entries.
/// Time-invariant matrices use horizon=1.
std::string matrix_schedule_to_csv(const std::string& name,
                                   const std::vector<Eigen::MatrixXd>& seq);
std::vector<Eigen::MatrixXd> matrix_schedule_from_csv(const std::string& content,
                                                      std::string* name = nullptr);

/// Key-value report files ("key = value" per line).
std::string kv_to_text(const std::vector<std::pair<std::string, std::string>>& items);
std::map<std::string, std::string> kv_from_text(const std::string& content);

}  // namespace ltvdw
