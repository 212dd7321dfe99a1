#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

namespace cursed::numerics {

/// Neumaier-compensated running sum.
template <typename Real = double>
class CompensatedSum {
public:
    void add(Real x) noexcept {
        const Real t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] Real value() const noexcept { return sum_ + comp_; }

private:
    Real sum_{0};
    Real comp_{0};
};

/// Composite 8-point Gauss-Legendre rule on [a, b].
template <typename F>
double integrate(F&& f, double a, double b, std::size_t panels = 256) {
    static constexpr std::array<double, 4> nodes{0.1834346424956498, 0.5255324099163290,
                                                 0.7966664774136267, 0.9602898564975363};
    static constexpr std::array<double, 4> weights{0.3626837833783620, 0.3137066458778873,
                                                   0.2223810344533745, 0.1012285362903763};
    if (!(b > a)) return 0.0;
    const double h = (b - a) / static_cast<double>(panels);
    CompensatedSum<double> total;
    for (std::size_t k = 0; k < panels; ++k) {
        const double mid = a + (static_cast<double>(k) + 0.5) * h;
        const double half = 0.5 * h;
        double panel = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            panel += weights[q] * (f(mid - half * nodes[q]) + f(mid + half * nodes[q]));
        }
        total.add(panel * half);
    }
    return total.value();
}

/// Golden-section maximisation of f on [lo, hi]. Returns the best point seen,
/// which matters when f jumps (step CDFs) and the bracket holds a discontinuity.
template <typename F>
std::pair<double, double> golden_maximize(F&& f, double lo, double hi, int iterations) {
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    double best_x = f1 >= f2 ? x1 : x2;
    double best_f = std::max(f1, f2);
    for (int it = 0; it < iterations; ++it) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            if (f1 > best_f || (f1 == best_f && x1 < best_x)) { best_f = f1; best_x = x1; }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            if (f2 > best_f || (f2 == best_f && x2 < best_x)) { best_f = f2; best_x = x2; }
        }
    }
    return {best_x, best_f};
}

}  // namespace cursed::numerics
