#include "swift/divergence.hpp"

#include "swift/error.hpp"

#include <cmath>

namespace swift {

double entropy(const Eigen::Ref<const Matrix>& m) {
  double e = 0.0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) {
      const double x = m(i, j);
      if (x > 0.0) e -= x * std::log(x);
    }
  return e;
}

double generalized_kl(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "KL operands differ in shape");
  double kl = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) {
      const double x = a(i, j);
      const double y = b(i, j);
      if (x > 0.0) {
        if (y <= 0.0)
          fail(ErrorKind::Numerical, "KL divergence is infinite: positive entry (" +
                                         std::to_string(i) + "," + std::to_string(j) +
                                         ") against zero");
        kl += x * std::log(x / y) - x + y;
      } else {
        kl += y;
      }
    }
  return kl;
}

}  // namespace swift
