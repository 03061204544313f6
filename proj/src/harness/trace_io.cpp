#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pnewton/harness.hpp"

namespace pnewton {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = line.find(sep);
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) return out;
    line.remove_prefix(pos + 1);
  }
}

double field_double(std::string_view s, long line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("invalid number '" + std::string(s) + "'", line);
  }
  return v;
}

std::optional<double> field_optional(std::string_view s, long line) {
  if (s.empty()) return std::nullopt;
  return field_double(s, line);
}

template <class Int>
Int field_int(std::string_view s, long line) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("invalid integer '" + std::string(s) + "'", line);
  }
  return v;
}

std::string optional_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_trace_csv(std::ostream& out, const IterateTrace& trace, bool timing) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    std::optional<double> gap;
    if (trace.f_star) gap = r.f - *trace.f_star;
    out << r.k << ',' << format_double(r.f) << ',' << optional_field(gap) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.rho) << ','
        << format_double(std::sqrt(r.step_norm_G_sq)) << ',' << optional_field(r.lyapunov) << ','
        << (timing ? r.elapsed_ns : 0) << '\n';
  }
}

void write_iterates_csv(std::ostream& out, const IterateTrace& trace) {
  const Index n = trace.records.empty() ? 0 : trace.records.front().x.size();
  out << 'k';
  for (Index i = 0; i < n; ++i) out << ",x_" << i;
  out << '\n';
  for (const auto& r : trace.records) {
    out << r.k;
    for (Index i = 0; i < n; ++i) out << ',' << format_double(r.x(i));
    out << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace file is empty", 1);
  strip_cr(line);
  if (line != kTraceHeader) throw ParseError("unexpected trace header '" + line + "'", 1);

  std::vector<TraceRow> rows;
  for (long lineno = 2; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) {
      throw ParseError("expected 8 fields, got " + std::to_string(f.size()), lineno);
    }
    TraceRow r;
    r.k = field_int<int>(f[0], lineno);
    if (r.k != static_cast<int>(rows.size())) {
      throw ParseError("k must be contiguous from 0", lineno);
    }
    r.f = field_double(f[1], lineno);
    r.gap = field_optional(f[2], lineno);
    r.grad_norm = field_double(f[3], lineno);
    r.rho = field_double(f[4], lineno);
    r.step_norm_G = field_double(f[5], lineno);
    r.lyapunov = field_optional(f[6], lineno);
    r.elapsed_ns = field_int<std::int64_t>(f[7], lineno);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("trace file has no records", 2);
  return rows;
}

std::vector<Vector> read_iterates_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("iterates file is empty", 1);
  strip_cr(line);
  const auto header = split(line, ',');
  if (header.empty() || header.front() != "k") {
    throw ParseError("iterates header must start with 'k'", 1);
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "x_" + std::to_string(i - 1)) {
      throw ParseError("unexpected iterates column '" + std::string(header[i]) + "'", 1);
    }
  }
  const auto n = static_cast<Index>(header.size() - 1);

  std::vector<Vector> xs;
  for (long lineno = 2; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (static_cast<Index>(f.size()) != n + 1) {
      throw ParseError("expected " + std::to_string(n + 1) + " fields", lineno);
    }
    if (field_int<long>(f[0], lineno) != static_cast<long>(xs.size())) {
      throw ParseError("k must be contiguous from 0", lineno);
    }
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = field_double(f[static_cast<std::size_t>(i + 1)], lineno);
    xs.push_back(std::move(x));
  }
  return xs;
}

IterateTrace rebuild_trace(Method method, double step_L, std::optional<double> f_star,
                           const std::vector<TraceRow>& rows, const std::vector<Vector>& iterates) {
  if (rows.size() != iterates.size()) {
    throw BadShape("trace has " + std::to_string(rows.size()) + " records but iterates file has " +
                   std::to_string(iterates.size()));
  }
  IterateTrace trace;
  trace.method = method;
  trace.step_L = step_L;
  trace.f_star = f_star;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    IterateRecord r;
    r.k = row.k;
    r.x = iterates[i];
    r.f = row.f;
    r.grad_norm = row.grad_norm;
    r.rho = row.rho;
    r.step_norm_G_sq = row.step_norm_G * row.step_norm_G;
    r.lyapunov = row.lyapunov;
    r.elapsed_ns = row.elapsed_ns;
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace pnewton
