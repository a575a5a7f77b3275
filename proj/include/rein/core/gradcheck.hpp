#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rein/core/adam.hpp"
#include "rein/core/tape.hpp"

namespace rein {

struct GradCheckReport {
  bool pass = true;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coords_checked = 0;
};

// Central-difference check of analytic gradients. loss_fn must be a pure
// forward pass (fresh tape, same noise) returning the scalar loss; the
// analytic gradients are read from Parameter::grad, so run backward and fill
// them before calling. Checks every coordinate when stride is 1; larger
// strides sample coordinates for speed.
inline GradCheckReport gradcheck(const std::vector<Parameter<double>*>& params,
                                 const std::function<double()>& loss_fn, double eps = 1e-5,
                                 double tol = 1e-6, int64_t stride = 1) {
  check<InvalidArgument>(eps > 0 && tol > 0 && stride >= 1, "gradcheck: bad settings");
  GradCheckReport rep;
  for (auto* p : params) {
    for (int64_t i = 0; i < p->value.numel(); i += stride) {
      const size_t k = static_cast<size_t>(i);
      const double keep = p->value.v[k];
      p->value.v[k] = keep + eps;
      const double fp = loss_fn();
      p->value.v[k] = keep - eps;
      const double fm = loss_fn();
      p->value.v[k] = keep;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = p->grad.v[k];
      const double abs_err = std::abs(numeric - analytic);
      const double rel_err = abs_err / std::max({1.0, std::abs(numeric), std::abs(analytic)});
      ++rep.coords_checked;
      if (rel_err > rep.max_rel_err) {
        rep.max_rel_err = rel_err;
        rep.max_abs_err = abs_err;
        rep.worst_param = p->name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace rein
