#include "graphopt/normal.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "graphopt/error.hpp"

namespace graphopt {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double standard_normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double standard_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("standard_normal_quantile: q must lie in (0, 1)");
  if (q == 0.5) return 0.0;
  if (q < 0.5) return -kSqrt2 * boost::math::erfc_inv(2.0 * q);
  return kSqrt2 * boost::math::erfc_inv(2.0 * (1.0 - q));
}

}  // namespace graphopt
