#include "retroinc/numeric.hpp"

#include <algorithm>

namespace retroinc {

double compensated_sum(std::span<const double> xs) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

double stable_sum(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return compensated_sum(xs);
}

} // namespace retroinc
