#ifndef AUXGMM_DATA_HPP
#define AUXGMM_DATA_HPP

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace auxgmm {

/// Verify-out: the auxiliary sample is independent of the primary sample and
/// the target is E[m | D = 1]. Verify-in: the auxiliary rows are a validated
/// subset of one sample and the target is E[m].
enum class SampleCase { VerifyOut, VerifyIn };

const char* to_string(SampleCase c) noexcept;
SampleCase parse_sample_case(const std::string& text);

struct ObservationRecord {
  Eigen::VectorXd x;
  std::optional<Eigen::VectorXd> y;
  int d = 1;  // 1 = primary (y missing), 0 = auxiliary (y observed)
};

/// Immutable pooled sample. Stored column-wise: x is n x d_x, y is n x d_y
/// with NaN in rows whose outcome is absent.
class Dataset {
 public:
  Dataset(std::vector<ObservationRecord> rows, SampleCase sample_case);
  Dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, Eigen::VectorXi d, SampleCase sample_case);

  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index n_primary() const noexcept { return n_primary_; }
  Eigen::Index n_auxiliary() const noexcept { return n() - n_primary_; }
  Eigen::Index d_x() const noexcept { return x_.cols(); }
  Eigen::Index d_y() const noexcept { return y_.cols(); }
  SampleCase sample_case() const noexcept { return case_; }

  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::MatrixXd& y() const noexcept { return y_; }
  const Eigen::VectorXi& d() const noexcept { return d_; }
  bool has_y(Eigen::Index i) const { return !std::isnan(y_(i, 0)); }

  ObservationRecord row(Eigen::Index i) const;

  Dataset with_case(SampleCase c) const;
  /// Rows reordered so that row k of the result is row order[k] of this one.
  Dataset permuted(const std::vector<Eigen::Index>& order) const;

 private:
  void validate();

  Eigen::MatrixXd x_;
  Eigen::MatrixXd y_;
  Eigen::VectorXi d_;
  SampleCase case_;
  Eigen::Index n_primary_ = 0;
};

/// Which CSV columns carry d, y and x. Detected from the header by default.
struct ColumnSpec {
  std::string d_column = "d";
  std::vector<std::string> y_columns;
  std::vector<std::string> x_columns;

  static ColumnSpec detect(const std::vector<std::string>& header);
};

Dataset load_dataset(std::istream& in, SampleCase sample_case,
                     const std::optional<ColumnSpec>& schema = std::nullopt);
Dataset load_dataset_file(const std::string& path, SampleCase sample_case);

/// Writes the canonical layout `d,y|y1..yk,x1..xk` with shortest round-trip
/// number formatting; loading the output reproduces the dataset exactly.
void write_dataset(const Dataset& ds, std::ostream& out);

struct SampleSplit {
  std::vector<Eigen::Index> primary;    // rows with d = 1
  std::vector<Eigen::Index> auxiliary;  // rows with d = 0
};

SampleSplit split_samples(const Dataset& ds);

/// n_p / n.
double marginal_p(const Dataset& ds);

}  // namespace auxgmm

#endif  // AUXGMM_DATA_HPP
