#pragma once

namespace graphopt {

/// Phi(x), computed as erfc(-x / sqrt(2)) / 2 so the lower tail keeps full
/// relative precision.
double standard_normal_cdf(double x);

/// 1 - Phi(x) without cancellation.
double standard_normal_sf(double x);

/// Phi^{-1}(q) for 0 < q < 1, via the inverse complementary error function
/// applied to the smaller tail. Throws InputError outside (0, 1).
double standard_normal_quantile(double q);

}  // namespace graphopt
