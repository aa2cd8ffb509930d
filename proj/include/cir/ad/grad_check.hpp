#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "cir/ad/var.hpp"

namespace cir::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;  // at worst_coord
  double numeric = 0.0;   // at worst_coord
};

/// Compares reverse-mode gradients of scalar `f` at `point` against central
/// differences. Per coordinate the error is |ga - gn| / max(1e-8, |ga| + |gn|);
/// the maximum is reported. `coords` restricts the check to a subset (all
/// coordinates when empty). eps must lie in [1e-4, 1e-2].
GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, float eps,
                           std::span<const std::size_t> coords = {});

/// Same check against a trainable leaf that `loss` closes over; the leaf is
/// perturbed in place and restored.
GradCheckResult grad_check_param(const std::function<Var()>& loss, Var param, float eps,
                                 std::span<const std::size_t> coords = {});

}  // namespace cir::ad
