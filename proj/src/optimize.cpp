#include "auxgmm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "auxgmm/error.hpp"

namespace auxgmm {

Eigen::VectorXd reflect_into_box(Eigen::VectorXd x, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) < lower(k)) {
      const double r = lower(k) + (lower(k) - x(k));
      x(k) = r <= upper(k) ? r : lower(k);
    } else if (x(k) > upper(k)) {
      const double r = upper(k) - (x(k) - upper(k));
      x(k) = r >= lower(k) ? r : upper(k);
    }
  }
  return x;
}

OptimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const OptimizerSpec& spec) {
  const Eigen::Index dim = x0.size();
  if (dim < 1 || lower.size() != dim || upper.size() != dim) {
    throw Error(ErrorKind::ShapeMismatch, "nelder_mead: start and box disagree in dimension");
  }
  const auto n = static_cast<std::size_t>(dim);
  std::vector<Eigen::VectorXd> pts(n + 1);
  std::vector<double> vals(n + 1);
  pts[0] = reflect_into_box(x0, lower, upper);
  vals[0] = f(pts[0]);
  if (!std::isfinite(vals[0])) {
    throw Error(ErrorKind::DomainError, "objective is not finite at the starting point");
  }
  for (Eigen::Index k = 0; k < dim; ++k) {
    Eigen::VectorXd v = pts[0];
    const double h = spec.initial_step * std::max(1.0, std::abs(v(k)));
    v(k) = v(k) + h <= upper(k) ? v(k) + h : v(k) - h;
    pts[static_cast<std::size_t>(k) + 1] = reflect_into_box(v, lower, upper);
    vals[static_cast<std::size_t>(k) + 1] = f(pts[static_cast<std::size_t>(k) + 1]);
  }

  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::size_t> order(n + 1);
  OptimizeResult out;
  for (int it = 0;; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const Eigen::VectorXd& best = pts[order[0]];
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      diameter = std::max(diameter, (pts[order[i]] - best).lpNorm<Eigen::Infinity>());
    }
    out.iterations = it;
    if (diameter < spec.tolerance * (1.0 + best.norm())) {
      out.converged = true;
      break;
    }
    if (it >= spec.max_iterations) break;

    const std::size_t worst = order[n];
    const std::size_t second_worst = order[n - 1];
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < n; ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = reflect_into_box(centroid + (centroid - pts[worst]), lower, upper);
    const double fr = eval(xr);
    if (fr < vals[order[0]]) {
      const Eigen::VectorXd xe =
          reflect_into_box(centroid + 2.0 * (centroid - pts[worst]), lower, upper);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second_worst]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    const Eigen::VectorXd anchor = pts[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      const std::size_t j = order[i];
      pts[j] = anchor + 0.5 * (pts[j] - anchor);
      vals[j] = eval(pts[j]);
    }
  }
  out.x = pts[order[0]];
  out.value = vals[order[0]];
  return out;
}

}  // namespace auxgmm
