#pragma once

#include <map>
#include <memory>
#include <vector>

#include "vortexbc/grid.hpp"

namespace vortexbc {

// Weber-Orr transform pair of order (k, l) between a radial grid on
// [r0, r_max] and a spectral grid on [lambda_min, lambda_max]:
//
//   forward:  f_hat(lambda) = int_{r0}^inf R_{k,l}(lambda, s) f(s) s ds
//   inverse:  f(r)          = int_0^inf    R_{k,l}(lambda, r) f_hat(lambda) lambda dlambda
//
// The kernel table R_{k,l}(lambda_j, r_i) is built once and serves both
// directions (the inverse is the transposed matvec with lambda weights).
class WeberOrrPlan {
public:
    WeberOrrPlan(int k, int l, GridPtr radial, GridPtr spectral);

    // tail_out, when given, receives the share of the quadrature mass carried
    // by the last panel of the integration axis; > 1e-8 signals that the
    // domain truncation limits accuracy.
    SpectralFunction forward(const RadialFunction& f, double* tail_out = nullptr) const;
    RadialFunction inverse(const SpectralFunction& fh, double* tail_out = nullptr) const;

    int order_k() const { return k_; }
    int order_l() const { return l_; }
    const GridPtr& radial_grid() const { return radial_; }
    const GridPtr& spectral_grid() const { return spectral_; }

    // Kernel boundary trace R_{k,l}(lambda_j, r0) per spectral node.  For the
    // solver pairs l = k-1 this is the boundary forcing kernel rho_k.
    const std::vector<double>& boundary_trace() const { return rho_; }

private:
    int k_, l_;
    GridPtr radial_, spectral_;
    std::vector<double> kernel_; // n_lambda x n_radial, row-major
    std::vector<double> rho_;
};

using PlanPtr = std::shared_ptr<const WeberOrrPlan>;

// Cache of plans on a fixed grid pair, keyed by (k, l).  Solvers hold one of
// these so kernel tables are built once per run and shared across steps.
class TransformCache {
public:
    TransformCache(GridPtr radial, GridPtr spectral);

    // Plan for (k, l); built on first use.
    PlanPtr plan(int k, int l);
    // Solver pair (|k|, |k|-1) for mode k.
    PlanPtr mode_plan(int k) { return plan(std::abs(k), std::abs(k) - 1); }

    const GridPtr& radial_grid() const { return radial_; }
    const GridPtr& spectral_grid() const { return spectral_; }

private:
    GridPtr radial_, spectral_;
    std::map<std::pair<int, int>, PlanPtr> plans_;
};

// moment_k(f) = int s^{1-|k|} f(s) ds: the L2(r dr) pairing of f with the
// transform pair's kernel function r^{-|k|}.
complexd radial_moment(int k, const RadialFunction& f);

// Returns f + c * phi_k with a fixed Gaussian bump phi_k scaled so the
// result's moment equals target.  The bump sits well inside the annulus, so
// the adjustment is numerically supported away from both boundary and tail.
RadialFunction project_moment_free(int k, const RadialFunction& f, complexd target);

// Relative residuals of the three transform differentiation rules
// (half-difference for d/dr, half-sum for k/r, and the forward-side rule
// lambda W_{k,k-1}[f] = W_{k-1,k-1}[k f / r + f']), for k >= 1.
struct DerivativeRuleReport {
    double dr_residual;
    double over_r_residual;
    double forward_residual;
};
DerivativeRuleReport check_derivative_rules(int k, const RadialFunction& f,
                                            TransformCache& cache);

} // namespace vortexbc
