#pragma once

#include <cmath>

namespace entlab {

/// Neumaier-compensated accumulator. Log-density and quadrature sums are
/// ill-conditioned near decision boundaries, so all long accumulations go
/// through this instead of a bare double.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  KahanSum& operator+=(double x) {
    add(x);
    return *this;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace entlab
