#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace emlab {

// Sample Pearson correlation. Requires >= 2 points and non-zero variance in
// both variables.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  const size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope*x + intercept with R^2 = 1 - SSres/SStot.
inline RegressionResult fit_single_predictor(const std::vector<double>& xs,
                                             const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit: length mismatch");
  const size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("fit: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit: zero variance in x");
  RegressionResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy == 0.0) {
    r.r2 = 1.0;  // constant y fitted exactly
    return r;
  }
  double ss_res = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (r.slope * xs[i] + r.intercept);
    ss_res += e * e;
  }
  r.r2 = 1.0 - ss_res / syy;
  if (r.r2 < 0.0) r.r2 = 0.0;
  if (r.r2 > 1.0) r.r2 = 1.0;
  return r;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// p dominates q iff p.x <= q.x, p.y <= q.y, strict in at least one.
inline bool dominates(const Point2& p, const Point2& q) {
  return p.x <= q.x && p.y <= q.y && (p.x < q.x || p.y < q.y);
}

/// Indices of all points not dominated under (minimize x, minimize y).
/// Duplicated points never dominate each other, so all copies survive.
inline std::vector<size_t> pareto_front(const std::vector<Point2>& points) {
  if (points.empty()) throw std::invalid_argument("pareto_front: empty input");
  std::vector<size_t> out;
  for (size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < points.size() && !dominated; ++j)
      if (j != i && dominates(points[j], points[i])) dominated = true;
    if (!dominated) out.push_back(i);
  }
  return out;
}

}  // namespace emlab
