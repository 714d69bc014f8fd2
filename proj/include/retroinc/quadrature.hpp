#pragma once

#include <functional>
#include <span>
#include <vector>

namespace retroinc {

// Adaptive Gauss-Kronrod (7, 15) integration of f over [a, b], bisecting
// until the embedded error estimate meets the tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, double abs_tol = 1e-14, int max_depth = 40);

// Same, but splits first at the given interior breakpoints (rate grid cuts,
// indicator switch ages) so the integrand is smooth on every initial cell.
double integrate_segmented(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, double rel_tol = 1e-12,
                           double abs_tol = 1e-14);

} // namespace retroinc
