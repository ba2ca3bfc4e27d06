#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "flora/error.hpp"
#include "flora/matrix.hpp"

namespace flora {

/// Central-difference gradient of `loss()` with respect to every entry of
/// every matrix in `params`. `loss` must read the parameters through the
/// same pointers; each entry is perturbed in place and restored.
template <class LossFn>
std::vector<Matrix> finite_difference_grad(LossFn&& loss, std::span<Matrix* const> params,
                                           double step) {
  FLORA_REQUIRE(step > 0.0, InvalidArgument, "finite difference step must be positive");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (Matrix* p : params) {
    Matrix g(p->rows(), p->cols());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = (*p)[i];
      (*p)[i] = saved + step;
      const double up = loss();
      (*p)[i] = saved - step;
      const double down = loss();
      (*p)[i] = saved;
      g[i] = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Largest relative error between two gradient sets. Entries where both
/// magnitudes are below `abs_floor` are compared absolutely.
inline double max_relative_error(std::span<const Matrix> analytic, std::span<const Matrix> numeric,
                                 double abs_floor = 1e-8) {
  FLORA_REQUIRE(analytic.size() == numeric.size(), InvalidArgument,
                "gradient lists differ in length");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    FLORA_REQUIRE(analytic[k].size() == numeric[k].size(), InvalidArgument,
                  "gradient shapes differ");
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i], n = numeric[k][i];
      const double scale = std::max(std::abs(a), std::abs(n));
      const double err = scale < abs_floor ? std::abs(a - n) : std::abs(a - n) / scale;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace flora
