#pragma once

#include <vector>

#include "vortexbc/biot_savart.hpp"
#include "vortexbc/weber_orr.hpp"

namespace vortexbc {

// Output of one semigroup application: the evolved state, the multiplied
// spectra e^{-lambda^2 t} w_hat_k, and the moment magnitude removed from any
// mode whose initial data was not compatible with the transform range.
struct SemigroupResult {
    double t = 0.0;
    VorticityState state;
    std::vector<SpectralFunction> spectra;     // index k + N
    std::vector<double> projected_moment;      // index k + N, 0 when untouched
    double tail_fraction = 0.0;

    SpectralFunction& spectrum(int k);
    const SpectralFunction& spectrum(int k) const;
};

// Heat evolution of every vorticity mode through the transform pair:
//   w_k(t) = Winv_{|k|,|k|-1}[ e^{-lambda^2 t} W_{|k|,|k|-1}[w0_k] ].
// Modes with nonzero moment are projected onto the transform range first;
// the removed magnitude is recorded in projected_moment.
SemigroupResult evolve_stokes(const VorticityState& w0, double t, TransformCache& cache);

// residual_k = r0 dw_k/dr(r0) + |k| w_k(r0) via the one-sided 3-point
// stencil (order 2).  Index k + N.
std::vector<complexd> robin_residual(const VorticityState& w);

// L2(r dr) norms summed over modes; the gradient uses the polar split
// |grad w|^2 = |dw/dr|^2 + |k w / r|^2 per mode.
double l2_norm(const VorticityState& w);
double gradient_norm(const VorticityState& w);
double h1_norm(const VorticityState& w);

// Measured semigroup-estimate ratios at one time.  All of l2, grad (against
// 1/sqrt(e t)), grad_proof (against the sharper 1/sqrt(2 e t) appearing in
// the proof) and h1 (against sqrt(3)) must stay <= 1 up to quadrature slack.
struct SemigroupBoundsRow {
    double t = 0.0;
    double l2_ratio = 0.0;
    double grad_ratio = 0.0;
    double grad_ratio_proof = 0.0;
    double h1_ratio = 0.0;
};

struct SemigroupBoundsReport {
    std::vector<SemigroupBoundsRow> rows;
    double worst = 0.0; // max over rows of the asserted ratios
};

SemigroupBoundsReport verify_semigroup_bounds(const VorticityState& w0,
                                              const std::vector<double>& times,
                                              TransformCache& cache);

// Independent Crank-Nicolson reference for d/dt w = Delta_k w with the
// one-sided third-order Robin closure of r0 w'(r0) + |k| w(r0) = 0 and
// Dirichlet at r_max, on a uniform grid of n_space points; second order in
// space and time.  The result is interpolated back onto w0's grid.
RadialFunction oracle_heat_robin(int k, const RadialFunction& w0_k, double t, int steps,
                                 int n_space);

// Same scheme with inhomogeneous Robin data imposed strongly:
// r0 w'(r0) + |k| w(r0) = u(t), where u is sampled at the steps + 1 time
// nodes of the uniform grid over [0, t].
RadialFunction oracle_heat_robin(int k, const RadialFunction& w0_k,
                                 const std::vector<complexd>& u_samples, double t,
                                 int steps, int n_space);

} // namespace vortexbc
