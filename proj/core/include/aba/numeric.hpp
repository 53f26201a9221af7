#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace aba {

// Neumaier-compensated accumulator. Results depend only on the order of
// add() calls, so callers sort inputs by a stable key before summing.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// Linear interpolation between closest ranks: the p-quantile of n sorted
// values sits at 1-based rank 1 + (n - 1) p.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace aba
