#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "pnewton/harness.hpp"

namespace pnewton {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view token, long line) {
  token = trim(token);
  // from_chars rejects an explicit plus sign, which libsvm labels often carry
  if (token.size() > 1 && token.front() == '+' && token[1] != '-') token.remove_prefix(1);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("invalid number '" + std::string(token) + "'", line);
  }
  return value;
}

bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

Dataset from_rows(const std::vector<std::vector<double>>& rows, const std::vector<double>& labels,
                  Index n) {
  Dataset d;
  d.a = Matrix::Zero(n, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i < rows[j].size(); ++i) {
      d.a(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
    }
  }
  d.labels = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
  return d;
}

Dataset parse_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::size_t width = 0;
  std::string line;
  for (long lineno = 1; std::getline(in, line); ++lineno) {
    if (skippable(line)) continue;
    std::vector<double> values;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_number(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (values.size() < 2) throw ParseError("need at least one feature and a label", lineno);
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, got " +
                       std::to_string(values.size()), lineno);
    }
    labels.push_back(values.back());
    values.pop_back();
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw EmptyDataset("dataset has no samples");
  return from_rows(rows, labels, static_cast<Index>(width - 1));
}

Dataset parse_libsvm(std::istream& in, std::optional<Index> num_features) {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  Index max_index = 0;
  std::string line;
  for (long lineno = 1; std::getline(in, line); ++lineno) {
    if (skippable(line)) continue;
    std::string_view rest = trim(line);
    auto next_token = [&rest]() {
      rest = trim(rest);
      const auto space = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, space);
      rest = space == std::string_view::npos ? std::string_view{} : rest.substr(space);
      return tok;
    };
    labels.push_back(parse_number(next_token(), lineno));

    std::vector<double> row;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("expected index:value, got '" + std::string(tok) + "'", lineno);
      }
      const double raw_index = parse_number(tok.substr(0, colon), lineno);
      const auto index = static_cast<Index>(raw_index);
      if (raw_index != static_cast<double>(index) || index < 1) {
        throw ParseError("feature index must be a positive integer", lineno);
      }
      if (num_features && index > *num_features) {
        throw ParseError("feature index " + std::to_string(index) + " exceeds " +
                         std::to_string(*num_features) + " features", lineno);
      }
      if (static_cast<Index>(row.size()) < index) row.resize(static_cast<std::size_t>(index), 0.0);
      row[static_cast<std::size_t>(index - 1)] = parse_number(tok.substr(colon + 1), lineno);
      max_index = std::max(max_index, index);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset("dataset has no samples");
  const Index n = num_features.value_or(max_index);
  if (n < 1) throw EmptyDataset("dataset has no features");
  return from_rows(rows, labels, n);
}

}  // namespace

DataFormat parse_format(std::string_view name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "libsvm") return DataFormat::libsvm;
  throw InvalidArgument("unknown dataset format '" + std::string(name) + "'");
}

std::string_view to_string(DataFormat format) {
  return format == DataFormat::csv ? "csv" : "libsvm";
}

Dataset parse_dataset(std::istream& in, DataFormat format, std::optional<Index> num_features) {
  return format == DataFormat::csv ? parse_csv(in) : parse_libsvm(in, num_features);
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     std::optional<Index> num_features) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path.string() + "'", 0);
  return parse_dataset(in, format, num_features);
}

Vector to_logistic_labels(const Vector& raw) {
  Vector out(raw.size());
  for (Index i = 0; i < raw.size(); ++i) {
    const double y = raw(i);
    if (y == 1.0) {
      out(i) = 1.0;
    } else if (y == -1.0 || y == 0.0) {
      out(i) = -1.0;
    } else {
      throw BadLabel("label " + std::to_string(y) + " of sample " + std::to_string(i) +
                     " is not in {0,1} or {-1,+1}");
    }
  }
  return out;
}

Dataset builtin_quadratic() {
  Dataset d;
  d.a.resize(3, 4);
  d.a << 2.0, 1.0, 0.0, 0.5,
         0.0, 1.0, 1.0, -1.0,
         1.0, 0.0, 3.0, 0.0;
  d.labels.resize(4);
  d.labels << 1.0, -2.0, 0.5, 3.0;
  return d;
}

}  // namespace pnewton
