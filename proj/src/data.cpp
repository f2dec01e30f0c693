#include "auxgmm/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      return cells;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Column names of the form <prefix><k>, sorted by k.
std::vector<std::string> numbered_columns(const std::vector<std::string>& header,
                                          char prefix) {
  std::vector<std::pair<int, std::string>> found;
  for (const auto& name : header) {
    if (name.size() < 2 || name[0] != prefix) continue;
    int k = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
    if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1) {
      found.emplace_back(k, name);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& [k, name] : found) out.push_back(name);
  return out;
}

}  // namespace

const char* to_string(SampleCase c) noexcept {
  return c == SampleCase::VerifyOut ? "verify-out" : "verify-in";
}

SampleCase parse_sample_case(const std::string& text) {
  if (text == "verify-out" || text == "VerifyOut" || text == "out") return SampleCase::VerifyOut;
  if (text == "verify-in" || text == "VerifyIn" || text == "in") return SampleCase::VerifyIn;
  throw Error(ErrorKind::ConfigError, "unknown sample case '" + text + "'");
}

Dataset::Dataset(std::vector<ObservationRecord> rows, SampleCase sample_case)
    : case_(sample_case) {
  if (rows.empty()) throw Error(ErrorKind::InvalidDataset, "dataset has no rows");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index dx = rows.front().x.size();
  Eigen::Index dy = 0;
  for (const auto& r : rows) {
    if (r.y) {
      dy = r.y->size();
      break;
    }
  }
  if (dy == 0) throw Error(ErrorKind::InvalidDataset, "no row carries an outcome");
  x_.resize(n, dx);
  y_ = Eigen::MatrixXd::Constant(n, dy, kNaN);
  d_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.x.size() != dx) {
      throw Error(ErrorKind::MalformedRow, "row " + std::to_string(i) + ": x has wrong length");
    }
    x_.row(i) = r.x.transpose();
    if (r.y) {
      if (r.y->size() != dy) {
        throw Error(ErrorKind::MalformedRow, "row " + std::to_string(i) + ": y has wrong length");
      }
      y_.row(i) = r.y->transpose();
    }
    d_(i) = r.d;
  }
  validate();
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, Eigen::VectorXi d, SampleCase sample_case)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)), case_(sample_case) {
  if (x_.rows() != y_.rows() || x_.rows() != d_.size()) {
    throw Error(ErrorKind::InvalidDataset, "x, y and d disagree on the number of rows");
  }
  validate();
}

void Dataset::validate() {
  n_primary_ = 0;
  if (x_.rows() == 0 || y_.cols() == 0) {
    throw Error(ErrorKind::InvalidDataset, "dataset is empty");
  }
  for (Eigen::Index i = 0; i < n(); ++i) {
    if (d_(i) != 0 && d_(i) != 1) {
      throw Error(ErrorKind::MalformedRow, "row " + std::to_string(i) + ": d must be 0 or 1");
    }
    if (!x_.row(i).allFinite()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(i) + ": x is not finite");
    }
    const bool any_missing = y_.row(i).array().isNaN().any();
    const bool all_missing = y_.row(i).array().isNaN().all();
    if (any_missing && !all_missing) {
      throw Error(ErrorKind::MalformedRow, "row " + std::to_string(i) + ": partially missing y");
    }
    if (!any_missing && !y_.row(i).allFinite()) {
      throw Error(ErrorKind::MalformedRow, "row " + std::to_string(i) + ": y is not finite");
    }
    if (d_(i) == 0 && all_missing) {
      throw Error(ErrorKind::MalformedRow,
                  "row " + std::to_string(i) + ": auxiliary row (d=0) lacks y");
    }
    n_primary_ += d_(i);
  }
  if (n_primary_ == 0 || n_primary_ == n()) {
    throw Error(ErrorKind::InvalidDataset,
                "dataset needs at least one primary (d=1) and one auxiliary (d=0) row");
  }
}

ObservationRecord Dataset::row(Eigen::Index i) const {
  ObservationRecord r;
  r.x = x_.row(i).transpose();
  if (has_y(i)) r.y = Eigen::VectorXd(y_.row(i).transpose());
  r.d = d_(i);
  return r;
}

Dataset Dataset::with_case(SampleCase c) const {
  Dataset copy = *this;
  copy.case_ = c;
  return copy;
}

Dataset Dataset::permuted(const std::vector<Eigen::Index>& order) const {
  if (static_cast<Eigen::Index>(order.size()) != n()) {
    throw Error(ErrorKind::ShapeMismatch, "permutation has the wrong length");
  }
  return Dataset(x_(order, Eigen::all), y_(order, Eigen::all), d_(order), case_);
}

ColumnSpec ColumnSpec::detect(const std::vector<std::string>& header) {
  ColumnSpec spec;
  if (std::find(header.begin(), header.end(), "y") != header.end()) {
    spec.y_columns = {"y"};
  } else {
    spec.y_columns = numbered_columns(header, 'y');
  }
  spec.x_columns = numbered_columns(header, 'x');
  return spec;
}

Dataset load_dataset(std::istream& in, SampleCase sample_case,
                     const std::optional<ColumnSpec>& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const ColumnSpec spec = schema ? *schema : ColumnSpec::detect(header);

  auto index_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorKind::ParseError, "CSV header lacks column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t d_col = index_of(spec.d_column);
  if (spec.y_columns.empty()) throw Error(ErrorKind::ParseError, "CSV header has no y column");
  if (spec.x_columns.empty()) throw Error(ErrorKind::ParseError, "CSV header has no x column");
  std::vector<std::size_t> y_cols;
  std::vector<std::size_t> x_cols;
  for (const auto& c : spec.y_columns) y_cols.push_back(index_of(c));
  for (const auto& c : spec.x_columns) x_cols.push_back(index_of(c));

  std::vector<ObservationRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = "line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::MalformedRow, where + ": expected " + std::to_string(header.size()) +
                                               " cells, found " + std::to_string(cells.size()));
    }
    ObservationRecord rec;
    const std::string& dcell = cells[d_col];
    if (dcell == "0") {
      rec.d = 0;
    } else if (dcell == "1") {
      rec.d = 1;
    } else {
      throw Error(ErrorKind::MalformedRow, where + ": d must be 0 or 1, got '" + dcell + "'");
    }
    rec.x.resize(static_cast<Eigen::Index>(x_cols.size()));
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      double v = 0.0;
      if (!parse_double(cells[x_cols[k]], v) || !std::isfinite(v)) {
        throw Error(ErrorKind::ParseError,
                    where + ": non-numeric x value '" + cells[x_cols[k]] + "'");
      }
      rec.x(static_cast<Eigen::Index>(k)) = v;
    }
    std::size_t empty_y = 0;
    for (auto c : y_cols) empty_y += cells[c].empty() ? 1 : 0;
    if (empty_y == y_cols.size()) {
      if (rec.d == 0) {
        throw Error(ErrorKind::MalformedRow, where + ": auxiliary row (d=0) lacks y");
      }
    } else if (empty_y != 0) {
      throw Error(ErrorKind::MalformedRow, where + ": partially missing y");
    } else {
      Eigen::VectorXd y(static_cast<Eigen::Index>(y_cols.size()));
      for (std::size_t k = 0; k < y_cols.size(); ++k) {
        double v = 0.0;
        if (!parse_double(cells[y_cols[k]], v) || !std::isfinite(v)) {
          throw Error(ErrorKind::ParseError,
                      where + ": non-numeric y value '" + cells[y_cols[k]] + "'");
        }
        y(static_cast<Eigen::Index>(k)) = v;
      }
      rec.y = std::move(y);
    }
    rows.push_back(std::move(rec));
  }
  return Dataset(std::move(rows), sample_case);
}

Dataset load_dataset_file(const std::string& path, SampleCase sample_case) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open data file '" + path + "'");
  return load_dataset(in, sample_case);
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "d";
  if (ds.d_y() == 1) {
    out << ",y";
  } else {
    for (Eigen::Index k = 0; k < ds.d_y(); ++k) out << ",y" << (k + 1);
  }
  for (Eigen::Index k = 0; k < ds.d_x(); ++k) out << ",x" << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << ds.d()(i);
    const bool has = ds.has_y(i);
    for (Eigen::Index k = 0; k < ds.d_y(); ++k) {
      out << ',';
      if (has) out << format_double(ds.y()(i, k));
    }
    for (Eigen::Index k = 0; k < ds.d_x(); ++k) out << ',' << format_double(ds.x()(i, k));
    out << '\n';
  }
}

SampleSplit split_samples(const Dataset& ds) {
  SampleSplit s;
  s.primary.reserve(static_cast<std::size_t>(ds.n_primary()));
  s.auxiliary.reserve(static_cast<std::size_t>(ds.n_auxiliary()));
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    (ds.d()(i) == 1 ? s.primary : s.auxiliary).push_back(i);
  }
  return s;
}

double marginal_p(const Dataset& ds) {
  return static_cast<double>(ds.n_primary()) / static_cast<double>(ds.n());
}

}  // namespace auxgmm
