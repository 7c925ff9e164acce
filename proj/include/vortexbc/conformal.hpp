#pragma once

#include <vector>

#include "vortexbc/biot_savart.hpp"
#include "vortexbc/grid.hpp"
#include "vortexbc/nonlinear.hpp"

namespace vortexbc {

// Inverse Riemann map from the exterior of the disc |z| >= r0 onto a general
// exterior simply connected domain, normalized to the identity at infinity:
//
//   Phi^{-1}(z) = z + sum_{n >= 1} b_n z^{-n},
//   (Phi^{-1})'(z) = 1 + sum_{n >= 2} c_n z^{-n},  c_n = -(n-1) b_{n-1}.
//
// Some displays abbreviate the derivative factor as Phi'^{-1}; this code
// always means the derivative of the inverse map.  The constructor rejects
// maps whose derivative series can reach zero on the boundary circle
// (sum |c_n| r0^{-n} >= 1), the numerical stand-in for the absolute
// convergence and univalence hypotheses.
struct ConformalMap {
    double r0 = 1.0;
    std::vector<complexd> b; // b[n-1] = b_n
    std::vector<complexd> c; // c[n] = c_n, size b.size() + 2
    int n_max = 16;          // evaluation truncation of the b series

    ConformalMap();
    explicit ConformalMap(double r0, std::vector<complexd> b = {}, int n_max = 16);

    bool is_identity() const;
    // Series mass ignored by evaluation: sum_{n > n_max} |b_n| r^{-n}.
    double series_tail(double r) const;
};

// Phi^{-1}(z) by partial sum.  tail, when given, receives the ignored series
// mass at |z|.  Throws std::domain_error for |z| < r0.
complexd eval_inverse_map(const ConformalMap& map, complexd z, double* tail = nullptr);

// (Phi^{-1})'(z) by partial sum, same domain and truncation rules.
complexd eval_inverse_map_derivative(const ConformalMap& map, complexd z,
                                     double* tail = nullptr);

// Transformed vorticity sources: the angular harmonics
//   r_k = [Im conj((Phi^{-1})') w]_k,  q_k = [Re conj((Phi^{-1})') w]_k.
// The map factor only has non-negative harmonics, so the harmonics of
// conj((Phi^{-1})') w needed at |k| <= N close over the state's own modes.
// alias_tail is the factor-series mass at r0 beyond what the angular ring
// and the evaluation truncation resolve; above 1e-8 the extracted harmonics
// are contaminated and alias_warning is set.
struct MappedSources {
    int N = 0;
    GridPtr grid;
    std::vector<RadialFunction> r_modes; // index k + N
    std::vector<RadialFunction> q_modes; // index k + N
    double alias_tail = 0.0;
    bool alias_warning = false;

    RadialFunction& r_mode(int k);
    const RadialFunction& r_mode(int k) const;
    RadialFunction& q_mode(int k);
    const RadialFunction& q_mode(int k) const;
};

// Harmonics of conj((Phi^{-1})') are extracted per radial node on a
// power-of-two angular ring and convolved with the state's modes in mode
// space.  The identity map reduces to q_k = w_k, r_k = 0 exactly.
MappedSources transform_sources(const ConformalMap& map, const VorticityState& w);

// Velocity modes on the mapped domain: the disc formulas with the inner
// integrand s^{|k|+1} (q_k - i sign(k) r_k) and the outer integrand
// s^{-|k|+1} (q_k + i sign(k) r_k).  The far field enters unchanged.
VelocityState mapped_reconstruct_velocity(const ConformalMap& map, const VorticityState& w,
                                          const FarField& far,
                                          BiotSavartReport* report = nullptr);

// moment_k = int_{r0}^{r_max} s^{-k+1} (q_k + i r_k) ds for k >= 0, the
// polar reduction of int conj((Phi^{-1})') w z^{-k} dx / (2 pi).  Equals the
// disc moment under the identity map.
complexd mapped_moment(const ConformalMap& map, int k, const VorticityState& w);

// residual_k = mapped_moment_k - 2 v_{inf,phi,k} r0^{1-k} for k = 0..N; all
// zero means the mapped boundary velocity modes vanish.
std::vector<complexd> mapped_manifold_residual(const ConformalMap& map,
                                               const VorticityState& w, const FarField& far);

// Total vorticity over the mapped exterior domain: 2 pi times the k = 0
// harmonic of |(Phi^{-1})'|^2 w integrated with s ds (the Jacobian restores
// the physical area element).
double mapped_circulation(const ConformalMap& map, const VorticityState& w);

// Harmonics mu_m(r) = [conj((Phi^{-1})')]_m on the given radial grid for the
// no-slip closure noslip_rhs, m = 0..m_max.  m_max < 0 selects the full
// derivative series.  The identity map yields the single constant mode 1.
MapFactor map_factor(const ConformalMap& map, const GridPtr& grid, int m_max = -1);

// Trajectory of the mapped linear vorticity equation
//   |(Phi^{-1})'|^2 dw/dt = Lap w,  r0 dw_k/dr + |k| w_k(r0) = 0,
// by the exponential-trapezoid rule on dw/dt = Lap w + f with the lagged
// weight correction f = (|(Phi^{-1})'|^{-2} - 1) Lap w assembled in mode
// space; Lap w comes from the spectra as -lambda^2 w_hat plus the analytic
// Laplacian of the kernel-residue attachment, never finite differences.
// Radial moments follow their flux law d m_k / dt = m_k(f_k) as in
// step_oseen.  The identity map turns the correction off exactly and the
// steps compose the plain semigroup.  far only enters the per-step manifold
// and boundary-velocity diagnostics.  Validated for gently perturbed maps
// (|b_1| <= 0.25 scale); the explicit correction needs the derivative to
// stay well away from zero on the boundary circle.
TrajectoryRecord evolve_stokes_mapped(const ConformalMap& map, const VorticityState& w0,
                                      const FarField& far, double T, int steps,
                                      TransformCache& cache);

} // namespace vortexbc
