#include "tmarch/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tmarch/errors.hpp"

namespace tmarch {

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;  // current row has content
  char ch;
  const auto end_row = [&] {
    if (any || !field.empty() || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    any = false;
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(ch);
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(ch);
        any = true;
    }
  }
  if (quoted) throw ConfigError("csv: unterminated quoted field");
  end_row();
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  const auto num = [&](std::size_t pos, std::size_t len, int& v) {
    const auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    return ec == std::errc() && p == s.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                     std::chrono::day{static_cast<unsigned>(d)}}
      .ok();
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw ConfigError("price csv: missing column '" + name + "'");
}

}  // namespace

PriceSeries parse_price_csv(std::istream& in, const PriceCsvOptions& options) {
  if (options.from && !valid_iso_date(*options.from)) throw ConfigError("price csv: bad from-date " + *options.from);
  if (options.to && !valid_iso_date(*options.to)) throw ConfigError("price csv: bad to-date " + *options.to);
  const auto rows = read_csv(in);
  if (rows.empty()) throw ConfigError("price csv: no header row");
  const std::size_t di = column_index(rows[0], options.date_column);
  const std::size_t pi = column_index(rows[0], options.price_column);

  struct Entry {
    std::string date;
    double price;
    std::size_t row;
  };
  std::vector<Entry> entries;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    const std::string where = " at row " + std::to_string(r + 1);
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() <= std::max(di, pi)) throw DataError("price csv: too few fields" + where);
    const std::string date = trim(fields[di]);
    if (!valid_iso_date(date)) throw DataError("price csv: bad date '" + date + "'" + where);
    if (options.from && date < *options.from) continue;
    if (options.to && date > *options.to) continue;
    double price = 0.0;
    if (!parse_double(fields[pi], price)) throw DataError("price csv: bad price '" + fields[pi] + "'" + where);
    if (!(price > 0.0) || !std::isfinite(price)) throw DataError("price csv: non-positive price" + where);
    entries.push_back({date, price, r + 1});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].date == entries[i - 1].date) {
      throw DataError("price csv: duplicate date " + entries[i].date + " at rows " +
                      std::to_string(entries[i - 1].row) + " and " + std::to_string(entries[i].row));
    }
  }
  PriceSeries out;
  out.values.resize(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.dates.push_back(entries[i].date);
    out.values[static_cast<Eigen::Index>(i)] = entries[i].price;
  }
  return out;
}

PriceSeries load_price_csv(const std::filesystem::path& path, const PriceCsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("price csv: cannot open " + path.string());
  PriceSeries out = parse_price_csv(in, options);
  out.source = path.string();
  return out;
}

ReturnSeries log_returns(const PriceSeries& prices) {
  const Eigen::Index n = prices.values.size();
  if (n < 2) throw InsufficientDataError("log_returns: need at least 2 prices");
  ReturnSeries out;
  out.values.resize(n - 1);
  for (Eigen::Index t = 0; t + 1 < n; ++t) out.values[t] = std::log(prices.values[t + 1]) - std::log(prices.values[t]);
  out.source = prices.source;
  return out;
}

ReturnSeries standardize(const ReturnSeries& series) {
  const Eigen::Index n = series.values.size();
  if (n < 2) throw InsufficientDataError("standardize: need at least 2 values");
  const double mean = series.values.mean();
  const double var = (series.values.array() - mean).square().mean();
  if (!(var > 0.0)) throw DomainError("standardize: zero variance");
  ReturnSeries out = series;
  out.mean = mean;
  out.scale = std::sqrt(var);
  out.values = (series.values.array() - mean) / out.scale;
  out.standardized = true;
  return out;
}

ReturnSeries unstandardize(const ReturnSeries& series) {
  ReturnSeries out = series;
  out.values = series.values.array() * series.scale + series.mean;
  out.mean = 0.0;
  out.scale = 1.0;
  out.standardized = false;
  return out;
}

void write_returns_csv(const ReturnSeries& series, std::ostream& out) {
  out << "t,r\n";
  char buf[64];
  for (Eigen::Index t = 0; t < series.values.size(); ++t) {
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, series.values[t]);
    out << t << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf)) << '\n';
  }
}

ReturnSeries read_returns_csv(std::istream& in) {
  const auto rows = read_csv(in);
  if (rows.empty()) throw ConfigError("returns csv: empty file");
  const std::size_t ri = column_index(rows[0], "r");
  std::vector<double> v;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    double x = 0.0;
    if (rows[r].size() <= ri || !parse_double(rows[r][ri], x)) {
      throw DataError("returns csv: bad value at row " + std::to_string(r + 1));
    }
    v.push_back(x);
  }
  ReturnSeries out;
  out.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return out;
}

}  // namespace tmarch
