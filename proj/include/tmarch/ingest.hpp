#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tmarch {

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF, newlines
/// inside quotes. Returns rows of fields, header included.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

struct PriceSeries {
  std::vector<std::string> dates;  // ISO yyyy-mm-dd, strictly increasing
  Eigen::VectorXd values;          // > 0
  std::string source;
};

struct PriceCsvOptions {
  std::string date_column = "Date";
  std::string price_column = "Adj Close";
  std::optional<std::string> from;  // inclusive, yyyy-mm-dd
  std::optional<std::string> to;    // inclusive
};

/// Rows are sorted by date. Throws ConfigError for a missing column, and
/// DataError (row numbers 1-based, header = row 1) for unparseable dates or
/// prices, duplicate dates and non-positive prices.
PriceSeries load_price_csv(const std::filesystem::path& path, const PriceCsvOptions& options = {});
PriceSeries parse_price_csv(std::istream& in, const PriceCsvOptions& options = {});

struct ReturnSeries {
  Eigen::VectorXd values;
  bool standardized = false;
  double mean = 0.0;   // removed by standardize
  double scale = 1.0;  // divided out by standardize
  std::string source;
};

/// r_t = ln S_{t+1} - ln S_t.
ReturnSeries log_returns(const PriceSeries& prices);

/// Zero mean, unit (population) variance; throws DomainError on zero variance.
ReturnSeries standardize(const ReturnSeries& series);
/// Inverse of standardize using the recorded mean and scale.
ReturnSeries unstandardize(const ReturnSeries& series);

/// `t,r` with t counted from 0.
void write_returns_csv(const ReturnSeries& series, std::ostream& out);
ReturnSeries read_returns_csv(std::istream& in);

}  // namespace tmarch
