#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace randse {

/// One realized sample. Column 0 of `w` is a nonzero constant (intercept);
/// every estimator extracts the coefficient on `d` as the first element.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd w;
  std::optional<std::vector<int>> group_ids;  // assignment groups, labels 0..n_g-1
  std::optional<Eigen::VectorXd> v;           // instrument

  Eigen::Index n() const { return y.size(); }
  Eigen::Index n_controls() const { return w.cols(); }

  /// Throws DataError when any structural invariant fails: mismatched row
  /// counts, n < d_w + 2, missing/zero intercept column, non-contiguous group
  /// labels, or d varying within an assignment group.
  void validate() const;
};

/// Number of distinct labels in a contiguous 0..G-1 labeling.
/// Throws DataError when labels are out of range or a label is unoccupied.
int count_groups(const std::vector<int>& ids);

/// Reads a dataset from CSV with a header row. Required columns: y, d.
/// Controls are w1..wk in order; a constant column is synthesized (with a
/// notice on `notices`) unless one of the wj columns is already constant.
/// Optional columns: group, v.
Dataset load_dataset_csv(const std::string& path, std::ostream* notices = nullptr);

}  // namespace randse
