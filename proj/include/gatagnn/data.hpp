#pragma once

// OHLCV ingestion, panel alignment, normalization, rolling windows,
// chronological splits and the sector-factor synthetic generator.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gatagnn/errors.hpp"
#include "gatagnn/tensor.hpp"

namespace gatagnn {

using Date = std::chrono::year_month_day;

/// Parses `YYYY-MM-DD`.
inline std::optional<Date> parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  char tail = 0;
  if (std::sscanf(std::string(s).c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

/// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Records and CSV input
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNumFeatures = 5;
enum Feature : std::size_t { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3, kTurnover = 4 };

struct OhlcvRecord {
  Date date{};
  std::string ticker;
  double open = 0, high = 0, low = 0, close = 0, turnover_rate = 0;
};

enum class TurnoverUnit { fraction, percent };

/// Column names expected in the input header, plus the turnover unit.
struct CsvSchema {
  std::string date = "date";
  std::string ticker = "ticker";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string turnover_rate = "turnover_rate";
  TurnoverUnit turnover_unit = TurnoverUnit::fraction;
};

/// Empty string when the record satisfies the OHLCV invariants.
inline std::string validate_record(const OhlcvRecord& r) {
  if (!(r.close > 0)) return "close must be > 0";
  if (!(r.open > 0) || !(r.high > 0) || !(r.low > 0)) return "prices must be > 0";
  if (r.high < std::max(r.open, r.close)) return "high below max(open, close)";
  if (r.low > std::min(r.open, r.close)) return "low above min(open, close)";
  if (!(r.turnover_rate >= 0.0 && r.turnover_rate <= 1.0)) return "turnover_rate outside [0, 1]";
  return {};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path.string());
  return in;
}

}  // namespace detail

inline std::vector<OhlcvRecord> load_csv(const std::filesystem::path& path, const CsvSchema& schema = {}) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError("empty dataset: " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_date = column(schema.date), c_ticker = column(schema.ticker), c_open = column(schema.open),
                    c_high = column(schema.high), c_low = column(schema.low), c_close = column(schema.close),
                    c_turn = column(schema.turnover_rate);

  std::vector<OhlcvRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    auto fail = [&](const std::string& why) {
      return DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != header.size())
      throw fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    OhlcvRecord r;
    auto date = parse_date(f[c_date]);
    if (!date) throw fail("bad date '" + f[c_date] + "'");
    r.date = *date;
    r.ticker = f[c_ticker];
    if (r.ticker.empty()) throw fail("empty ticker");
    auto num = [&](std::size_t c, const std::string& name) {
      auto v = detail::parse_double(f[c]);
      if (!v) throw fail("bad number in column '" + name + "': '" + f[c] + "'");
      return *v;
    };
    r.open = num(c_open, schema.open);
    r.high = num(c_high, schema.high);
    r.low = num(c_low, schema.low);
    r.close = num(c_close, schema.close);
    r.turnover_rate = num(c_turn, schema.turnover_rate);
    if (schema.turnover_unit == TurnoverUnit::percent) r.turnover_rate /= 100.0;
    if (auto why = validate_record(r); !why.empty()) throw fail(why);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw DataError("empty dataset: " + path.string());
  return records;
}

/// `ticker,industry` file.
inline std::map<std::string, std::string> load_industry_map(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty industry map: " + path.string());
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "ticker" || header[1] != "industry")
    throw SchemaError(path.string() + ": header must be 'ticker,industry'");
  std::map<std::string, std::string> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 2 || f[0].empty())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed industry row");
    out[f[0]] = f[1];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

/// N companies × D shared days × F features, plus percent returns.
struct PanelDataset {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  std::vector<double> features;  // [(i * D + t) * F + f]
  std::vector<double> returns;   // [i * D + t]; day 0 is NaN (no previous close)
  std::optional<std::map<std::string, std::string>> industry;

  std::size_t n_companies() const { return tickers.size(); }
  std::size_t n_days() const { return dates.size(); }

  double& feature(std::size_t i, std::size_t t, std::size_t f) {
    return features[(i * n_days() + t) * kNumFeatures + f];
  }
  double feature(std::size_t i, std::size_t t, std::size_t f) const {
    return features[(i * n_days() + t) * kNumFeatures + f];
  }
  double& ret(std::size_t i, std::size_t t) { return returns[i * n_days() + t]; }
  double ret(std::size_t i, std::size_t t) const { return returns[i * n_days() + t]; }
};

/// r_t = 100·(close_t / close_{t−1} − 1); entry 0 is NaN.
inline std::vector<double> compute_returns(std::span<const double> close) {
  std::vector<double> r(close.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < close.size(); ++t) {
    if (!(close[t] > 0)) throw DataError("non-positive close price at index " + std::to_string(t));
    if (t > 0) r[t] = 100.0 * (close[t] - close[t - 1]) / close[t - 1];
  }
  return r;
}

namespace detail {
inline void fill_returns(PanelDataset& p) {
  const std::size_t n = p.n_companies(), d = p.n_days();
  p.returns.assign(n * d, 0.0);
  std::vector<double> close(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) close[t] = p.feature(i, t, kClose);
    const auto r = compute_returns(close);
    std::copy(r.begin(), r.end(), p.returns.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
}
}  // namespace detail

/// Builds the panel on the intersection of every ticker's dates. An empty
/// `tickers` list means every ticker present, in sorted order.
inline PanelDataset align_and_build(const std::vector<OhlcvRecord>& records, std::vector<std::string> tickers = {}) {
  std::map<std::string, std::map<Date, const OhlcvRecord*>> by_ticker;
  for (const auto& r : records) {
    auto [it, inserted] = by_ticker[r.ticker].emplace(r.date, &r);
    if (!inserted) throw DataError("duplicate row for " + r.ticker + " on " + format_date(r.date));
  }
  if (tickers.empty())
    for (const auto& [t, _] : by_ticker) tickers.push_back(t);
  if (tickers.empty()) throw DataError("no tickers to align");

  std::set<Date> common;
  bool first = true;
  for (const auto& t : tickers) {
    auto it = by_ticker.find(t);
    if (it == by_ticker.end() || it->second.empty()) throw DataError("alignment error: ticker " + t + " has no records");
    std::set<Date> mine;
    for (const auto& [d, _] : it->second) mine.insert(d);
    if (first) {
      common = std::move(mine);
      first = false;
    } else {
      std::set<Date> keep;
      std::set_intersection(common.begin(), common.end(), mine.begin(), mine.end(), std::inserter(keep, keep.end()));
      if (keep.empty()) throw DataError("alignment error: ticker " + t + " has zero overlapping dates");
      common = std::move(keep);
    }
  }

  PanelDataset p;
  p.tickers = tickers;
  p.dates.assign(common.begin(), common.end());
  const std::size_t n = tickers.size(), d = p.dates.size();
  p.features.assign(n * d * kNumFeatures, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rows = by_ticker[tickers[i]];
    for (std::size_t t = 0; t < d; ++t) {
      const OhlcvRecord& r = *rows.at(p.dates[t]);
      p.feature(i, t, kOpen) = r.open;
      p.feature(i, t, kHigh) = r.high;
      p.feature(i, t, kLow) = r.low;
      p.feature(i, t, kClose) = r.close;
      p.feature(i, t, kTurnover) = r.turnover_rate;
    }
  }
  detail::fill_returns(p);
  return p;
}

/// Keeps only the listed tickers (in the given order).
inline PanelDataset select_tickers(const PanelDataset& p, const std::vector<std::string>& keep) {
  PanelDataset out;
  out.dates = p.dates;
  out.industry = p.industry;
  const std::size_t d = p.n_days();
  for (const auto& t : keep) {
    auto it = std::find(p.tickers.begin(), p.tickers.end(), t);
    if (it == p.tickers.end()) throw ConfigError("unknown ticker: " + t);
    const auto i = static_cast<std::size_t>(it - p.tickers.begin());
    out.tickers.push_back(t);
    out.features.insert(out.features.end(), p.features.begin() + static_cast<std::ptrdiff_t>(i * d * kNumFeatures),
                        p.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * d * kNumFeatures));
    out.returns.insert(out.returns.end(), p.returns.begin() + static_cast<std::ptrdiff_t>(i * d),
                       p.returns.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return out;
}

inline void write_csv(const PanelDataset& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "date,ticker,open,high,low,close,turnover_rate\n";
  for (std::size_t t = 0; t < p.n_days(); ++t)
    for (std::size_t i = 0; i < p.n_companies(); ++i) {
      out << format_date(p.dates[t]) << ',' << p.tickers[i];
      for (std::size_t f = 0; f < kNumFeatures; ++f) out << ',' << format_double(p.feature(i, t, f));
      out << '\n';
    }
  if (!out) throw DataError("write failed: " + path.string());
}

inline void write_industry_map(const std::map<std::string, std::string>& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "ticker,industry\n";
  for (const auto& [t, ind] : m) out << t << ',' << ind << '\n';
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Half-open day range [begin, end).
struct DayRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Per-company, per-feature mean and standard deviation.
struct NormalizationStats {
  std::vector<double> mean;  // [i * F + f]
  std::vector<double> std;
};

inline constexpr double kMinFeatureStd = 1e-8;

inline NormalizationStats compute_normalization(const PanelDataset& p, DayRange range) {
  if (range.end <= range.begin || range.end > p.n_days())
    throw ConfigError("normalization range must be a non-empty sub-range of the panel");
  const std::size_t n = p.n_companies();
  const auto count = static_cast<double>(range.end - range.begin);
  NormalizationStats s;
  s.mean.assign(n * kNumFeatures, 0.0);
  s.std.assign(n * kNumFeatures, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double m = 0.0;
      for (std::size_t t = range.begin; t < range.end; ++t) m += p.feature(i, t, f);
      m /= count;
      double v = 0.0;
      for (std::size_t t = range.begin; t < range.end; ++t) v += (p.feature(i, t, f) - m) * (p.feature(i, t, f) - m);
      s.mean[i * kNumFeatures + f] = m;
      s.std[i * kNumFeatures + f] = std::sqrt(v / count);
    }
  return s;
}

/// Z-scores every day with statistics from `train_range` only. Features whose
/// train std is below 1e-8 become 0 for that company.
inline PanelDataset normalize_features(const PanelDataset& p, DayRange train_range) {
  const auto s = compute_normalization(p, train_range);
  PanelDataset out = p;
  for (std::size_t i = 0; i < p.n_companies(); ++i)
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const double m = s.mean[i * kNumFeatures + f];
      const double sd = s.std[i * kNumFeatures + f];
      for (std::size_t t = 0; t < p.n_days(); ++t)
        out.feature(i, t, f) = sd < kMinFeatureStd ? 0.0 : (p.feature(i, t, f) - m) / sd;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Windows and splits
// ---------------------------------------------------------------------------

/// Inputs for predicting day `t_index` from days [t_index − T, t_index).
struct WindowSample {
  std::size_t t_index = 0;
  std::vector<Tensor> steps;              // T tensors, each N×F: day t_index − T + k
  std::vector<double> target_return;      // N, percent
  std::vector<std::size_t> target_class;  // N, 1 iff return > 0

  std::size_t n_companies() const { return target_return.size(); }
  std::size_t window() const { return steps.size(); }

  /// Company i's T×F window.
  Tensor company_window(std::size_t i) const {
    Tensor w(steps.size(), kNumFeatures);
    for (std::size_t k = 0; k < steps.size(); ++k)
      for (std::size_t f = 0; f < kNumFeatures; ++f) w(k, f) = steps[k](i, f);
    return w;
  }
};

inline std::vector<WindowSample> build_windows(const PanelDataset& p, std::size_t T) {
  if (T < 1) throw ConfigError("window length must be >= 1");
  const std::size_t d = p.n_days(), n = p.n_companies();
  if (d <= T)
    throw DataError("insufficient history: " + std::to_string(d) + " days for window " + std::to_string(T));
  std::vector<WindowSample> out;
  out.reserve(d - T);
  for (std::size_t t = T; t < d; ++t) {
    WindowSample s;
    s.t_index = t;
    s.steps.reserve(T);
    for (std::size_t k = 0; k < T; ++k) {
      Tensor x(n, kNumFeatures);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < kNumFeatures; ++f) x(i, f) = p.feature(i, t - T + k, f);
      s.steps.push_back(std::move(x));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double r = p.ret(i, t);
      s.target_return.push_back(r);
      s.target_class.push_back(r > 0.0 ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct SplitSpec {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

/// val and test are floor(n·fraction); the remainder goes to train.
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  const double total = spec.train_fraction + spec.val_fraction + spec.test_fraction;
  if (spec.train_fraction < 0 || spec.val_fraction < 0 || spec.test_fraction < 0 || std::abs(total - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  SplitSizes s;
  const auto nd = static_cast<double>(n);
  s.val = static_cast<std::size_t>(std::floor(nd * spec.val_fraction + 1e-9));
  s.test = static_cast<std::size_t>(std::floor(nd * spec.test_fraction + 1e-9));
  if (s.val + s.test > n) throw ConfigError("split sizes exceed sample count");
  s.train = n - s.val - s.test;
  if (s.train == 0 || s.val == 0 || s.test == 0)
    throw ConfigError("empty split: " + std::to_string(n) + " samples give train/val/test " + std::to_string(s.train) +
                      "/" + std::to_string(s.val) + "/" + std::to_string(s.test));
  return s;
}

struct Splits {
  std::vector<WindowSample> train, val, test;
};

inline Splits split_chronological(std::vector<WindowSample> samples, const SplitSpec& spec) {
  std::sort(samples.begin(), samples.end(),
            [](const WindowSample& a, const WindowSample& b) { return a.t_index < b.t_index; });
  const auto sz = split_sizes(samples.size(), spec);
  Splits out;
  auto it = std::make_move_iterator(samples.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sz.train));
  it += static_cast<std::ptrdiff_t>(sz.train);
  out.val.assign(it, it + static_cast<std::ptrdiff_t>(sz.val));
  it += static_cast<std::ptrdiff_t>(sz.val);
  out.test.assign(it, std::make_move_iterator(samples.end()));
  return out;
}

/// Days whose values may feed training statistics: everything up to and
/// including the last training target.
inline DayRange train_day_range(std::size_t n_days, std::size_t T, const SplitSpec& spec) {
  if (n_days <= T)
    throw DataError("insufficient history: " + std::to_string(n_days) + " days for window " + std::to_string(T));
  const auto sz = split_sizes(n_days - T, spec);
  return {0, T + sz.train};
}

/// How price columns enter the model before z-scoring.
enum class PriceMode {
  level,     // raw open/high/low/close
  relative,  // 100·ln(price / previous close); day 0 uses its own open
};

inline std::string to_string(PriceMode m) { return m == PriceMode::level ? "level" : "relative"; }

inline PriceMode parse_price_mode(std::string_view s) {
  if (s == "level") return PriceMode::level;
  if (s == "relative") return PriceMode::relative;
  throw ConfigError("unknown price mode: " + std::string(s));
}

/// Rewrites the four price columns as percent log-distances from the
/// previous close. Turnover is left untouched.
inline PanelDataset relative_prices(const PanelDataset& p) {
  PanelDataset out = p;
  for (std::size_t i = 0; i < p.n_companies(); ++i)
    for (std::size_t t = 0; t < p.n_days(); ++t) {
      const double ref = t == 0 ? p.feature(i, 0, kOpen) : p.feature(i, t - 1, kClose);
      for (std::size_t f : {kOpen, kHigh, kLow, kClose}) out.feature(i, t, f) = 100.0 * std::log(p.feature(i, t, f) / ref);
    }
  return out;
}

/// Normalize with train-range statistics, window and split.
inline Splits prepare_samples(const PanelDataset& raw, std::size_t T, const SplitSpec& spec,
                              PriceMode mode = PriceMode::level) {
  const auto range = train_day_range(raw.n_days(), T, spec);
  const auto panel = normalize_features(mode == PriceMode::relative ? relative_prices(raw) : raw, range);
  return split_chronological(build_windows(panel, T), spec);
}

// ---------------------------------------------------------------------------
// Synthetic sector-factor data
// ---------------------------------------------------------------------------

/// Sector factor model. Log-returns are expressed in percent:
///   l(i,t) = factor_strength·f(s(i), t − lag(i))
///          + cross_leakage·f(s(i)+1 mod S, t − 1)
///          + noise_sigma·e(i,t)
/// with f and e iid N(0, 1). lag(i) is 1 for the last round(lead_lag·size)
/// companies of each sector ("followers") and 0 otherwise. With lead_lag and
/// cross_leakage at 0 this is the plain contemporaneous sector model.
struct SyntheticSpec {
  std::size_t n_companies = 30;
  std::size_t n_days = 630;
  std::size_t n_sectors = 5;
  double factor_strength = 1.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;
  double lead_lag = 0.0;
  double cross_leakage = 0.0;
};

inline void validate(const SyntheticSpec& s) {
  if (s.n_sectors < 1 || s.n_companies < s.n_sectors)
    throw ConfigError("synthetic spec needs n_companies >= n_sectors >= 1");
  if (s.n_days < 2) throw ConfigError("synthetic spec needs at least 2 days");
  if (!(s.factor_strength >= 0.0 && s.factor_strength <= 1.0)) throw ConfigError("factor_strength must be in [0, 1]");
  if (!(s.noise_sigma > 0.0)) throw ConfigError("noise_sigma must be > 0");
  if (!(s.lead_lag >= 0.0 && s.lead_lag <= 1.0)) throw ConfigError("lead_lag must be in [0, 1]");
  if (!(s.cross_leakage >= 0.0)) throw ConfigError("cross_leakage must be >= 0");
}

inline std::size_t synthetic_sector(const SyntheticSpec& s, std::size_t i) { return i * s.n_sectors / s.n_companies; }

inline PanelDataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_companies, d = spec.n_days, S = spec.n_sectors;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> turnover(std::nextafter(0.0, 1.0), 0.2);
  constexpr double kJitter = 0.1;  // percent

  PanelDataset p;
  const int width = static_cast<int>(std::to_string(n).size());
  std::map<std::string, std::string> industry;
  std::vector<std::size_t> lag(n, 0);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (synthetic_sector(spec, i) == s) members.push_back(i);
    const auto followers = static_cast<std::size_t>(std::lround(spec.lead_lag * static_cast<double>(members.size())));
    for (std::size_t k = members.size() - followers; k < members.size(); ++k) lag[members[k]] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "SYN%0*zu", width, i);
    p.tickers.emplace_back(buf);
    industry[buf] = "sector_" + std::to_string(synthetic_sector(spec, i));
  }
  p.industry = industry;

  std::chrono::sys_days day{Date{std::chrono::year{2019}, std::chrono::month{11}, std::chrono::day{18}}};
  while (p.dates.size() < d) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) p.dates.emplace_back(day);
    day += std::chrono::days{1};
  }

  p.features.assign(n * d * kNumFeatures, 0.0);
  std::vector<double> prev_factor(S), factor(S), prev_close(n, 100.0);
  for (auto& f : prev_factor) f = normal(rng);
  for (std::size_t t = 0; t < d; ++t) {
    for (auto& f : factor) f = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = synthetic_sector(spec, i);
      const double own = lag[i] ? prev_factor[s] : factor[s];
      const double log_ret = spec.factor_strength * own + spec.cross_leakage * prev_factor[(s + 1) % S] +
                             spec.noise_sigma * normal(rng);
      const double close = prev_close[i] * std::exp(log_ret / 100.0);
      const double open = prev_close[i] * std::exp(kJitter * normal(rng) / 100.0);
      const double high = std::max(open, close) * std::exp(kJitter * std::abs(normal(rng)) / 100.0);
      const double low = std::min(open, close) * std::exp(-kJitter * std::abs(normal(rng)) / 100.0);
      p.feature(i, t, kOpen) = open;
      p.feature(i, t, kHigh) = high;
      p.feature(i, t, kLow) = low;
      p.feature(i, t, kClose) = close;
      p.feature(i, t, kTurnover) = turnover(rng);
      prev_close[i] = close;
    }
    prev_factor = factor;
  }
  detail::fill_returns(p);
  return p;
}

}  // namespace gatagnn
