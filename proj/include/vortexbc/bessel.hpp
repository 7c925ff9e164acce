#pragma once

namespace vortexbc {

// Integer-order Bessel functions of the first and second kind.
//
// Evaluation strategy: compensated (double-double) power series for small and
// moderate arguments, Hankel asymptotic expansion with a compensated phase
// for large arguments, upward recurrence for Y_k and for J_k when k <= x,
// Miller backward recurrence when k > x.  Accuracy is ~1e-14 relative to the
// local envelope sqrt(J_k^2 + Y_k^2) for x in (0, 1e4], |k| <= 64.

// J_k(x) for x >= 0.  Throws std::domain_error on x < 0.
double bessel_j(int k, double x);

// Y_k(x) for x > 0.  Throws std::domain_error on x <= 0.
double bessel_y(int k, double x);

// Fills j[0..kmax] and y[0..kmax] with J_m(x), Y_m(x) in one recurrence
// sweep.  Cheaper than kmax+1 scalar calls when building kernel tables.
void bessel_jy_orders(int kmax, double x, double* j, double* y);

// Weber-Orr kernel
//   R_{k,l}(lambda, r) = [J_k(lambda r) Y_l(lambda r0) - Y_k(lambda r) J_l(lambda r0)]
//                        / sqrt(J_l(lambda r0)^2 + Y_l(lambda r0)^2)
// for lambda > 0, r >= r0 > 0.  Negative orders reduce via J_{-k} = (-1)^k J_k.
double kernel_R(int k, int l, double lambda, double r, double r0);

// d/dr of kernel_R at fixed lambda, using J_k'(x) = J_{k-1}(x) - (k/x) J_k(x)
// (and likewise for Y), never finite differences.
double kernel_R_dr(int k, int l, double lambda, double r, double r0);

// Boundary forcing kernel
//   rho_k(lambda) = 2 / (pi r0 lambda sqrt(J_{|k|-1}(lambda r0)^2 + Y_{|k|-1}(lambda r0)^2)),
// the boundary trace R_{|k|,|k|-1}(lambda, r0) of the transform kernel.
double forcing_kernel(int k, double lambda, double r0);

} // namespace vortexbc
