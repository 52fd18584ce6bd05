#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>

#include "locpoly/dataset.hpp"
#include "locpoly/error.hpp"
#include "locpoly/experiment.hpp"

namespace locpoly {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  // from_chars does not accept a leading '+'.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, context + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline long long parse_integer(std::string_view s, const std::string& context) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, context + ": '" + std::string(s) + "' is not an integer");
  return v;
}

namespace detail {
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}
} // namespace detail

// ---------------------------------------------------------------------------
// Dataset files: header x1..xd,y1..yD, one sample per row.

inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = detail::open_for_write(path);
  for (Eigen::Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  for (Eigen::Index j = 0; j < data.D(); ++j) out << ",y" << (j + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << format_double(data.xs()(i, j));
    for (Eigen::Index j = 0; j < data.D(); ++j) out << ',' << format_double(data.ys()(i, j));
    out << '\n';
  }
  detail::finish_write(out, path);
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw Error(ErrorCode::ParseError, where + ": empty file");
  const auto header = detail::split_fields(lines[0]);
  Eigen::Index d = 0, D = 0;
  for (auto name : header) {
    const bool is_x = !name.empty() && name.front() == 'x';
    const bool is_y = !name.empty() && name.front() == 'y';
    if (!is_x && !is_y) throw Error(ErrorCode::ParseError, where + ": header column '" + std::string(name) + "' is not x<j> or y<j>");
    const std::string expected = (is_x ? "x" : "y") + std::to_string((is_x ? d : D) + 1);
    if (name != expected || (is_x && D > 0))
      throw Error(ErrorCode::ParseError, where + ": header must read x1..xd,y1..yD, got '" + std::string(name) + "'");
    (is_x ? d : D)++;
  }
  if (d == 0 || D == 0) throw Error(ErrorCode::ParseError, where + ": header needs at least one x and one y column");
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  if (n == 0) throw Error(ErrorCode::ParseError, where + ": no data rows");
  Eigen::MatrixXd xs(n, d), ys(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fields = detail::split_fields(lines[static_cast<std::size_t>(i + 1)]);
    const std::string ctx = where + ":" + std::to_string(i + 2);
    if (static_cast<Eigen::Index>(fields.size()) != d + D)
      throw Error(ErrorCode::ParseError, ctx + ": expected " + std::to_string(d + D) + " fields, got " + std::to_string(fields.size()));
    for (Eigen::Index j = 0; j < d; ++j) xs(i, j) = parse_double(fields[static_cast<std::size_t>(j)], ctx);
    for (Eigen::Index j = 0; j < D; ++j) ys(i, j) = parse_double(fields[static_cast<std::size_t>(d + j)], ctx);
  }
  return Dataset(std::move(xs), std::move(ys));
}

// ---------------------------------------------------------------------------
// Result tables.

inline constexpr std::string_view kRawHeader = "D,n,trial,error,N_n,delta_n,status";
inline constexpr std::string_view kAggregateHeader = "D,n,mean_error,var_error,trials_ok";

inline void write_raw_csv(std::ostream& out, const std::vector<TrialRow>& rows) {
  out << kRawHeader << '\n';
  for (const auto& r : rows)
    out << r.D << ',' << r.n << ',' << r.trial << ',' << format_double(r.error) << ',' << r.N_n << ','
        << format_double(r.delta_n) << ',' << status_name(r.status) << '\n';
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const auto& a : rows)
    out << a.D << ',' << a.n << ',' << format_double(a.mean_error) << ',' << format_double(a.var_error) << ','
        << a.trials_ok << '\n';
}

/// Writes the raw table and the aggregate table to two files.
inline void emit_csv(const ResultTable& table, const std::filesystem::path& raw_path,
                     const std::filesystem::path& aggregate_path) {
  {
    auto out = detail::open_for_write(raw_path);
    write_raw_csv(out, table.raw);
    detail::finish_write(out, raw_path);
  }
  auto out = detail::open_for_write(aggregate_path);
  write_aggregate_csv(out, table.aggregates);
  detail::finish_write(out, aggregate_path);
}

inline std::vector<TrialRow> read_raw_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != kRawHeader)
    throw Error(ErrorCode::ParseError, path.string() + ": header must be '" + std::string(kRawHeader) + "'");
  std::vector<TrialRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string ctx = path.string() + ":" + std::to_string(i + 1);
    const auto f = detail::split_fields(lines[i]);
    if (f.size() != 7) throw Error(ErrorCode::ParseError, ctx + ": expected 7 fields");
    TrialRow r;
    r.D = static_cast<int>(parse_integer(f[0], ctx));
    r.n = parse_integer(f[1], ctx);
    r.trial = static_cast<int>(parse_integer(f[2], ctx));
    r.error = parse_double(f[3], ctx);
    r.N_n = parse_integer(f[4], ctx);
    r.delta_n = parse_double(f[5], ctx);
    r.status = parse_status(f[6]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != kAggregateHeader)
    throw Error(ErrorCode::ParseError, path.string() + ": header must be '" + std::string(kAggregateHeader) + "'");
  std::vector<AggregateRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string ctx = path.string() + ":" + std::to_string(i + 1);
    const auto f = detail::split_fields(lines[i]);
    if (f.size() != 5) throw Error(ErrorCode::ParseError, ctx + ": expected 5 fields");
    rows.push_back({static_cast<int>(parse_integer(f[0], ctx)), parse_integer(f[1], ctx), parse_double(f[2], ctx),
                    parse_double(f[3], ctx), static_cast<int>(parse_integer(f[4], ctx))});
  }
  return rows;
}

inline ResultTable read_result_table(const std::filesystem::path& raw_path, const std::filesystem::path& aggregate_path) {
  return ResultTable{read_raw_csv(raw_path), read_aggregate_csv(aggregate_path)};
}

} // namespace locpoly
