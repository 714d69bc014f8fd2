#include "retroinc/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace retroinc {

namespace {

// Kronrod-15 abscissae on [0, 1] side (symmetric) with Kronrod weights; the
// odd-indexed abscissae are the embedded Gauss-7 nodes.
constexpr double kAbscissae[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0,
};
constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
};
constexpr double kGaussWeights[4] = {
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
};

struct Panel {
    double kronrod = 0.0;
    double error = 0.0;
};

Panel evaluate_panel(const std::function<double(double)>& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double kronrod = 0.0;
    double gauss = 0.0;
    for (int i = 0; i < 7; ++i) {
        const double lo = f(center - half * kAbscissae[i]);
        const double hi = f(center + half * kAbscissae[i]);
        kronrod += kKronrodWeights[i] * (lo + hi);
        if (i % 2 == 1) {
            gauss += kGaussWeights[i / 2] * (lo + hi);
        }
    }
    const double mid = f(center);
    kronrod += kKronrodWeights[7] * mid;
    gauss += kGaussWeights[3] * mid;
    return {kronrod * half, std::abs(kronrod - gauss) * half};
}

double integrate_recursive(const std::function<double(double)>& f, double a, double b,
                           const Panel& panel, double rel_tol, double abs_tol, int depth) {
    if (depth <= 0 ||
        panel.error <= std::max(abs_tol, rel_tol * std::abs(panel.kronrod))) {
        return panel.kronrod;
    }
    const double mid = 0.5 * (a + b);
    const Panel left = evaluate_panel(f, a, mid);
    const Panel right = evaluate_panel(f, mid, b);
    return integrate_recursive(f, a, mid, left, rel_tol, abs_tol, depth - 1) +
           integrate_recursive(f, mid, b, right, rel_tol, abs_tol, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_tol, int max_depth) {
    if (!(b > a)) {
        return 0.0;
    }
    return integrate_recursive(f, a, b, evaluate_panel(f, a, b), rel_tol, abs_tol, max_depth);
}

double integrate_segmented(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, double rel_tol, double abs_tol) {
    if (!(b > a)) {
        return 0.0;
    }
    std::vector<double> points{a, b};
    for (double p : breakpoints) {
        if (p > a && p < b) {
            points.push_back(p);
        }
    }
    std::sort(points.begin(), points.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        total += integrate(f, points[i], points[i + 1], rel_tol, abs_tol);
    }
    return total;
}

} // namespace retroinc
