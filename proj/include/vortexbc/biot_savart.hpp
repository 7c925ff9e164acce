#pragma once

#include <vector>

#include "vortexbc/grid.hpp"

namespace vortexbc {

// Fourier data of the flow at infinity.  A uniform stream (vx, vy) has
// nonzero angular coefficients only at |k| = 1:
//   v_{inf,r,k}   = (vx - i k vy) / 2,
//   v_{inf,phi,k} = (vy + i k vx) / 2 = sign(k) i v_{inf,r,k}.
struct FarField {
    double vx = 0.0;
    double vy = 0.0;

    complexd r_coeff(int k) const;
    complexd phi_coeff(int k) const;
};

FarField far_field_coeffs(double vx, double vy);

// Vorticity Fourier modes w_k, k in [-N, N], sampled on a shared radial grid.
// Real vorticity fields satisfy w_{-k} = conj(w_k); mirror_negative_modes
// enforces that from the k >= 0 half.
struct VorticityState {
    int N = 0;
    GridPtr grid;
    std::vector<RadialFunction> modes; // index k + N

    VorticityState() = default;
    VorticityState(int N, GridPtr grid);

    RadialFunction& mode(int k);
    const RadialFunction& mode(int k) const;
    void mirror_negative_modes();
};

// Velocity Fourier modes (v_{r,k}, v_{phi,k}) on the same layout.
struct VelocityState {
    int N = 0;
    GridPtr grid;
    std::vector<RadialFunction> vr;   // index k + N
    std::vector<RadialFunction> vphi; // index k + N

    VelocityState() = default;
    VelocityState(int N, GridPtr grid);

    RadialFunction& vr_mode(int k);
    const RadialFunction& vr_mode(int k) const;
    RadialFunction& vphi_mode(int k);
    const RadialFunction& vphi_mode(int k) const;
};

// Diagnostics accumulated while reconstructing.  tail_fraction mirrors the
// transform-side warning: the share of the outer integrand carried by the
// last panel, maximized over modes.  l1_tail covers the |k| <= 1 modes,
// which need L1(r dr) control.  circulation must stay near zero for the
// reconstruction to be the unique decaying velocity field.
struct BiotSavartReport {
    double tail_fraction = 0.0;
    double l1_tail = 0.0;
    double circulation = 0.0;
};

// Velocity modes from vorticity modes in the exterior of the disc:
//   v_{r,k}   = sign(k) (i/2) [ r^{-|k|-1} I_in + r^{|k|-1} I_out ] + v_{inf,r,k}
//   v_{phi,k} =         (1/2) [ r^{-|k|-1} I_in - r^{|k|-1} I_out ] + v_{inf,phi,k}
// with I_in(r) = int_{r0}^r s^{|k|+1} w_k ds and I_out(r) = int_r^{r_max}
// s^{-|k|+1} w_k ds (the infinite upper limit truncated at the grid end).
VelocityState reconstruct_velocity(const VorticityState& w, const FarField& far,
                                   BiotSavartReport* report = nullptr);

// moment_k = int_{r0}^{r_max} s^{-|k|+1} w_k ds.  The k-th boundary velocity
// modes vanish exactly when moment_k = 2 v_{inf,phi,k} r0^{1-|k|}.
complexd moment(int k, const VorticityState& w);

// residual_k = moment_k - 2 v_{inf,phi,k} r0^{1-|k|} for k = 0..N.  All zero
// means the state sits on the no-slip moment manifold (negative k follows by
// conjugate symmetry).  The r0 power only matters at |k| = 1 where it is 1,
// since the far-field coefficients vanish elsewhere.
std::vector<complexd> manifold_residual(const VorticityState& w, const FarField& far);

// Total vorticity integral 2 pi int s w_0 ds.
double circulation(const VorticityState& w);

// Truncated boundary-trace surrogate for the H^{1/2} distance to the stream:
// sqrt( sum_{|k| <= K} (1+|k|) (|v_{r,k}(r0)|^2 + |v_{phi,k}(r0)|^2) ).
double boundary_velocity_norm(const VelocityState& v, int K);

} // namespace vortexbc
