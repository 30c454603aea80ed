#include "lpspde/coefficients.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lpspde {

CoefficientField::CoefficientField(const Extents& extents) : CoefficientField(extents, 1) {
  constant_ = true;
}

CoefficientField::CoefficientField(const Extents& extents, Index n_points)
    : extents_(extents), n_points_(n_points), constant_(false) {
  Index total = n_points;
  for (Index e : extents) {
    if (e < 1) throw std::invalid_argument("coefficient extents must be positive");
    total *= e;
  }
  if (n_points < 1) throw std::invalid_argument("coefficient field needs at least one point");
  values_.assign(static_cast<std::size_t>(total), 0.0);
}

CoefficientField CoefficientField::constant(const Extents& extents, double value) {
  CoefficientField f(extents);
  std::fill(f.values_.begin(), f.values_.end(), value);
  return f;
}

Index CoefficientField::offset(Index point, Index i, Index j, Index a, Index b, Index k) const {
  const std::array<Index, 5> idx{i, j, a, b, k};
  Index off = constant_ ? 0 : point;
  if (!constant_ && (point < 0 || point >= n_points_))
    throw std::out_of_range("coefficient point index out of range");
  for (std::size_t s = 0; s < 5; ++s) {
    if (idx[s] < 0 || idx[s] >= extents_[s]) throw std::out_of_range("coefficient slot index out of range");
    off = off * extents_[s] + idx[s];
  }
  return off;
}

double CoefficientField::operator()(Index point, Index i, Index j, Index a, Index b, Index k) const {
  return values_[static_cast<std::size_t>(offset(point, i, j, a, b, k))];
}

double& CoefficientField::at(Index point, Index i, Index j, Index a, Index b, Index k) {
  return values_[static_cast<std::size_t>(offset(point, i, j, a, b, k))];
}

void CoefficientField::set_everywhere(Index i, Index j, Index a, Index b, Index k, double value) {
  const Index points = constant_ ? 1 : n_points_;
  for (Index p = 0; p < points; ++p) at(p, i, j, a, b, k) = value;
}

Vector CoefficientField::nodal(Index n_nodes, Index i, Index j, Index a, Index b, Index k) const {
  Vector out(n_nodes);
  if (constant_) {
    out.setConstant((*this)(0, i, j, a, b, k));
    return out;
  }
  if (n_nodes != n_points_) throw std::invalid_argument("coefficient field defined on a different grid");
  for (Index p = 0; p < n_nodes; ++p) out(p) = (*this)(p, i, j, a, b, k);
  return out;
}

void CoefficientField::validate(Index n_nodes, const std::string& name) const {
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument(name + ": non-finite coefficient");
  if (!constant_ && n_points_ != n_nodes)
    throw std::invalid_argument(name + ": field has " + std::to_string(n_points_) +
                                " points, grid has " + std::to_string(n_nodes));
}

namespace {

struct Row {
  Index point;  // -1 for '*'
  std::array<Index, 5> idx;
  double value;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw std::invalid_argument(where + ": cannot parse '" + text + "'");
  return value;
}

}  // namespace

CoefficientField load_coefficient_csv(const std::string& path, Index n_points) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open coefficient file '" + path + "'");
  std::string line;
  std::vector<Row> rows;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    const std::string where = path + ":" + std::to_string(line_no);
    if (!header_seen) {
      header_seen = true;
      const std::vector<std::string> expected{"point", "i", "j", "alpha", "beta", "k", "value"};
      if (cells != expected)
        throw std::invalid_argument(where + ": expected header point,i,j,alpha,beta,k,value");
      continue;
    }
    if (cells.size() != 7) throw std::invalid_argument(where + ": expected 7 columns");
    Row r{};
    r.point = cells[0] == "*" ? -1 : parse_number<Index>(cells[0], where);
    for (std::size_t s = 0; s < 5; ++s) r.idx[s] = parse_number<Index>(cells[s + 1], where);
    r.value = parse_number<double>(cells[6], where);
    if (r.point < -1) throw std::invalid_argument(where + ": negative point index");
    for (Index v : r.idx)
      if (v < 0) throw std::invalid_argument(where + ": negative slot index");
    rows.push_back(r);
  }
  CoefficientField::Extents ext{1, 1, 1, 1, 1};
  Index max_point = -1;
  for (const Row& r : rows) {
    for (std::size_t s = 0; s < 5; ++s) ext[s] = std::max(ext[s], r.idx[s] + 1);
    max_point = std::max(max_point, r.point);
  }
  const bool constant = max_point < 0;
  if (constant) {
    CoefficientField f(ext);
    for (const Row& r : rows) f.set_everywhere(r.idx[0], r.idx[1], r.idx[2], r.idx[3], r.idx[4], r.value);
    return f;
  }
  const Index points = n_points > 0 ? n_points : max_point + 1;
  if (max_point >= points) throw std::invalid_argument(path + ": point index exceeds grid size");
  CoefficientField f(ext, points);
  for (const Row& r : rows) {
    if (r.point < 0) f.set_everywhere(r.idx[0], r.idx[1], r.idx[2], r.idx[3], r.idx[4], r.value);
  }
  for (const Row& r : rows) {
    if (r.point >= 0) f.at(r.point, r.idx[0], r.idx[1], r.idx[2], r.idx[3], r.idx[4]) = r.value;
  }
  return f;
}

}  // namespace lpspde
