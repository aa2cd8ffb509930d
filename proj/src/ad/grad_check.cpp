#include "cir/ad/grad_check.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cir::ad {

namespace {

void check_eps(float eps) {
  if (!(eps >= 1e-4f && eps <= 1e-2f)) throw std::invalid_argument("grad_check: eps must lie in [1e-4, 1e-2]");
}

std::vector<std::size_t> all_or(std::span<const std::size_t> coords, std::size_t n) {
  if (!coords.empty()) return {coords.begin(), coords.end()};
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

// Central difference on one coordinate of `slot`, using the representable
// step actually taken.
template <class Eval>
double central_difference(Tensor& slot, std::size_t i, float eps, Eval&& eval) {
  const float x0 = slot[i];
  const float hi = x0 + eps;
  const float lo = x0 - eps;
  slot[i] = hi;
  const double f_hi = eval();
  slot[i] = lo;
  const double f_lo = eval();
  slot[i] = x0;
  return (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
}

void accumulate(GradCheckResult& r, std::size_t i, double ga, double gn) {
  const double err = std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn));
  if (err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_coord = i;
    r.analytic = ga;
    r.numeric = gn;
  }
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, float eps,
                           std::span<const std::size_t> coords) {
  check_eps(eps);
  Var x(point, true);
  const Tensor analytic = backward(f(x)).of(x);

  Tensor probe = point;
  auto eval = [&] {
    NoGradGuard guard;
    return static_cast<double>(f(Var(probe, false)).value().item());
  };
  GradCheckResult r;
  for (std::size_t i : all_or(coords, point.size())) {
    accumulate(r, i, analytic[i], central_difference(probe, i, eps, eval));
  }
  return r;
}

GradCheckResult grad_check_param(const std::function<Var()>& loss, Var param, float eps,
                                 std::span<const std::size_t> coords) {
  check_eps(eps);
  if (!param.requires_grad()) throw std::invalid_argument("grad_check_param: parameter must require gradients");
  const Tensor analytic = backward(loss()).of(param);

  Tensor& slot = param.mutable_value();
  auto eval = [&] {
    NoGradGuard guard;
    return static_cast<double>(loss().value().item());
  };
  GradCheckResult r;
  for (std::size_t i : all_or(coords, slot.size())) {
    accumulate(r, i, analytic[i], central_difference(slot, i, eps, eval));
  }
  return r;
}

}  // namespace cir::ad
