#include "randse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "randse/errors.hpp"

namespace randse {

void Dataset::validate() const {
  const Eigen::Index rows = y.size();
  if (d.size() != rows || w.rows() != rows) {
    throw DataError("dataset columns disagree on row count");
  }
  if (v && v->size() != rows) {
    throw DataError("instrument column has wrong length");
  }
  if (group_ids && static_cast<Eigen::Index>(group_ids->size()) != rows) {
    throw DataError("group column has wrong length");
  }
  if (w.cols() < 1) {
    throw DataError("control matrix needs at least the constant column");
  }
  if (rows < w.cols() + 2) {
    throw DataError("too few rows: need n >= d_w + 2");
  }
  const double c0 = w(0, 0);
  if (c0 == 0.0 || (w.col(0).array() != c0).any()) {
    throw DataError("first control column must be a nonzero constant");
  }
  if (group_ids) {
    const int n_g = count_groups(*group_ids);
    std::vector<double> group_d(static_cast<std::size_t>(n_g));
    std::vector<bool> seen(static_cast<std::size_t>(n_g), false);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto g = static_cast<std::size_t>((*group_ids)[static_cast<std::size_t>(i)]);
      if (!seen[g]) {
        seen[g] = true;
        group_d[g] = d(i);
      } else if (group_d[g] != d(i)) {
        throw DataError("d must be constant within each assignment group");
      }
    }
  }
}

int count_groups(const std::vector<int>& ids) {
  if (ids.empty()) throw DataError("empty group labeling");
  const int max_label = *std::max_element(ids.begin(), ids.end());
  const int min_label = *std::min_element(ids.begin(), ids.end());
  if (min_label != 0) throw DataError("group labels must start at 0");
  std::vector<bool> occupied(static_cast<std::size_t>(max_label) + 1, false);
  for (int g : ids) occupied[static_cast<std::size_t>(g)] = true;
  if (!std::all_of(occupied.begin(), occupied.end(), [](bool b) { return b; })) {
    throw DataError("group labels must be contiguous with every label occupied");
  }
  return max_label + 1;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw DataError("bad numeric field '" + s + "' on line " + std::to_string(line_no));
  }
}

}  // namespace

Dataset load_dataset_csv(const std::string& path, std::ostream* notices) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file '" + path + "'");
  const auto header = split_csv_line(line);

  int col_y = -1, col_d = -1, col_group = -1, col_v = -1;
  std::vector<std::pair<int, int>> w_cols;  // (index k from w<k>, column position)
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& name = header[j];
    if (name == "y") {
      col_y = static_cast<int>(j);
    } else if (name == "d") {
      col_d = static_cast<int>(j);
    } else if (name == "group") {
      col_group = static_cast<int>(j);
    } else if (name == "v") {
      col_v = static_cast<int>(j);
    } else if (name.size() >= 2 && name[0] == 'w') {
      try {
        w_cols.emplace_back(std::stoi(name.substr(1)), static_cast<int>(j));
      } catch (const std::exception&) {
        throw DataError("unrecognized column '" + name + "'");
      }
    } else {
      throw DataError("unrecognized column '" + name + "'");
    }
  }
  if (col_y < 0 || col_d < 0) throw DataError("columns 'y' and 'd' are required");
  std::sort(w_cols.begin(), w_cols.end());

  std::vector<double> ys, ds, vs;
  std::vector<std::vector<double>> ws(w_cols.size());
  std::vector<int> groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    ys.push_back(parse_double(fields[static_cast<std::size_t>(col_y)], line_no));
    ds.push_back(parse_double(fields[static_cast<std::size_t>(col_d)], line_no));
    for (std::size_t k = 0; k < w_cols.size(); ++k) {
      ws[k].push_back(
          parse_double(fields[static_cast<std::size_t>(w_cols[k].second)], line_no));
    }
    if (col_v >= 0) {
      vs.push_back(parse_double(fields[static_cast<std::size_t>(col_v)], line_no));
    }
    if (col_group >= 0) {
      groups.push_back(static_cast<int>(
          parse_double(fields[static_cast<std::size_t>(col_group)], line_no)));
    }
  }
  const auto n = static_cast<Eigen::Index>(ys.size());
  if (n == 0) throw DataError("no data rows in '" + path + "'");

  // Synthesize the intercept unless a supplied control is already constant.
  bool have_constant = false;
  for (const auto& col : ws) {
    if (!col.empty() && col[0] != 0.0 &&
        std::all_of(col.begin(), col.end(), [&](double x) { return x == col[0]; })) {
      have_constant = true;
    }
  }

  Dataset data;
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.d = Eigen::Map<Eigen::VectorXd>(ds.data(), n);
  const auto k_extra = static_cast<Eigen::Index>(ws.size());
  if (have_constant) {
    data.w.resize(n, k_extra);
    for (Eigen::Index k = 0; k < k_extra; ++k) {
      data.w.col(k) = Eigen::Map<Eigen::VectorXd>(ws[static_cast<std::size_t>(k)].data(), n);
    }
    // Move the constant column to the front if it is not already there.
    for (Eigen::Index k = 1; k < k_extra; ++k) {
      const double c = data.w(0, k);
      if (c != 0.0 && (data.w.col(k).array() == c).all()) {
        if ((data.w.col(0).array() == data.w(0, 0)).all() && data.w(0, 0) != 0.0) break;
        data.w.col(k).swap(data.w.col(0));
        if (notices) {
          *notices << "notice: moved constant column w" << w_cols[static_cast<std::size_t>(k)].first
                   << " to the intercept position\n";
        }
        break;
      }
    }
  } else {
    data.w.resize(n, k_extra + 1);
    data.w.col(0).setOnes();
    for (Eigen::Index k = 0; k < k_extra; ++k) {
      data.w.col(k + 1) =
          Eigen::Map<Eigen::VectorXd>(ws[static_cast<std::size_t>(k)].data(), n);
    }
    if (notices) *notices << "notice: no constant control found; intercept column synthesized\n";
  }
  if (col_v >= 0) data.v = Eigen::Map<Eigen::VectorXd>(vs.data(), n);
  if (col_group >= 0) data.group_ids = groups;

  data.validate();
  return data;
}

}  // namespace randse
