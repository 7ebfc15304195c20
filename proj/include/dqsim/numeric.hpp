#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace dqsim {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs);
double mean(std::span<const double> xs);
// Sample variance with the n - 1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);
double sample_covariance(std::span<const double> xs, std::span<const double> ys);

// Standard normal quantile. Acklam's rational approximation refined by one
// Halley step against erfc; absolute error well below 1e-12 on (0, 1).
double normal_quantile(double p);

// z with P(-z <= Z <= z) = level.
double two_sided_z(double level);

}  // namespace dqsim
