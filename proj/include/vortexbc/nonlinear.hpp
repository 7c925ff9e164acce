#pragma once

#include <vector>

#include "vortexbc/biot_savart.hpp"
#include "vortexbc/grid.hpp"
#include "vortexbc/weber_orr.hpp"

namespace vortexbc {

// Robin boundary data u_k(t_j) for modes k in [0, N], sampled on a uniform
// time grid t_j = t0 + j dt.  Negative modes follow from the conjugate
// pairing of the boundary conditions: the mode -k satisfies
// r0 dw/dr + |k| w = conj(u_k), so value(-k, j) = conj(value(k, j)).
struct BoundaryControl {
    int N = 0;
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<std::vector<complexd>> samples; // index k in [0, N], then j

    BoundaryControl() = default;
    BoundaryControl(int N, double t0, double dt, int nodes);

    int nodes() const;
    double time(int j) const;
    double t_end() const;
    complexd value(int k, int j) const;
    // Linear interpolation in time; exact at grid nodes.  Throws outside
    // [t0, t_end] beyond a small rounding slack.
    complexd value_at(int k, double t) const;
};

// Per-step record kept by the trajectory solvers.  contraction is the last
// ratio of successive Picard increments (0 when the first increment already
// met the tolerance); manifold_residual_max and boundary_velocity are
// measured on the accepted end-of-step state.
struct StepDiagnostics {
    int picard_iterations = 0;
    double contraction = 0.0;
    double manifold_residual_max = 0.0;
    double boundary_velocity = 0.0;
    double cfl_number = 0.0;
    double tail_fraction = 0.0;
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<VorticityState> states;
    std::vector<StepDiagnostics> diagnostics; // one entry per step
};

struct SolverOptions {
    double picard_tol = 1e-10;
    int picard_max_iter = 40;
    double control_tol = 1e-8;
    int control_max_outer = 30;
    int control_modes = -1; // < 0 means the state's own mode cutoff
};

struct OseenStepReport {
    double cfl_number = 0.0;
    bool cfl_warning = false;
    double tail_fraction = 0.0;
};

struct ControlSolution {
    BoundaryControl control;
    TrajectoryRecord trajectory;
    int outer_iterations = 0;
    std::vector<double> outer_deltas; // sup |u^{j+1} - u^j| per outer pass
};

// (vel, grad w) assembled in mode space: for each output mode k the sum over
// k1 + k2 = k of v_{r,k1} dw_{k2}/dr + v_{phi,k1} (i k2 / r) w_{k2}, with
// both factors truncated at their own cutoffs.  The radial derivative uses
// the panel differentiation matrices of the grid.
VorticityState advection_term(const VorticityState& w, const VelocityState& vel);

// The literal spectral factor rho_k(lambda) int_{t0}^t e^{-lambda^2 (t-tau)}
// u_k(tau) dtau, with u piecewise linear on its grid and the semigroup
// weights integrated exactly per interval.  Mode k >= 0.
SpectralFunction boundary_forcing_spectrum(const BoundaryControl& u, int k, double t,
                                           TransformCache& cache);

// Boundary forcing as it enters the mild solution: minus the inverse
// transform of boundary_forcing_spectrum, conjugate-extended to k < 0.  The
// result solves the Robin heat problem with zero initial data and boundary
// data u, so its Robin trace is u_k(t); the trace lives in a boundary layer
// of width ~1/lambda_max, invisible to one-sided stencils at r0.
// tail_fraction, when given, receives the worst last-panel share of the
// spectral integrand (rho_k decays like lambda^{-1/2}, so the cutoff is the
// accuracy limit here).
VorticityState boundary_forcing(const BoundaryControl& u, double t, TransformCache& cache,
                                double* tail_fraction = nullptr);

// One step of the Oseen equation dw/dt = Lap w - (vel, grad w) with frozen
// advecting field vel and Robin data u, by the exponential-trapezoid rule:
// the semigroup and the boundary forcing increment are exact in lambda, the
// advection term is evaluated at t (given state) and t + dt (ETD1 predictor)
// with linear-in-tau interpolation between.  u must cover [t, t + dt].
// The transform range carries the r^{-|k|} kernel sector only partially, so
// each mode's radial moment rides on an explicit scalar evolved by its flux
// law d m_k/dt = -r0^{-|k|} u_k - m_k((vel, grad w)_k) and re-attached via
// the kernel residue of a unit-moment bump; spectra and moments stay
// consistent for any data.
VorticityState step_oseen(const VorticityState& w, const VelocityState& vel,
                          const BoundaryControl& u, double t, double dt,
                          TransformCache& cache, OseenStepReport* report = nullptr);

// Trajectory of the vorticity equation with self-consistent velocity: per
// step the advecting field at t + dt is the Biot-Savart reconstruction of
// the end-of-step iterate, resolved by Picard iteration from the ETD1
// predictor.  Throws when the measured contraction factor stays >= 1 for
// three consecutive steps (outside the small-data regime).  Moments follow
// their flux law as in step_oseen, so manifold residuals respond to the
// control; far-field moment targets at |k| = 1 sit on the logarithmically
// resolved part of the spectral grid and converge slowest.
TrajectoryRecord solve_helmholtz(const VorticityState& w0, const FarField& far,
                                 const BoundaryControl& u, double T, double dt,
                                 TransformCache& cache, const SolverOptions& opts = {});

// Angular Fourier modes mu_m(r) of the conjugated mapping derivative
// conj((Phi^{-1})'), m >= 0 (negative modes vanish for exterior maps).  The
// disc case is the single constant mode 1.
struct MapFactor {
    std::vector<RadialFunction> modes;
};

// Right-hand side of the no-slip boundary closure: for k > 0
//   F_k = (k r0^k / 2 pi) * integral of (v_inf^C - v^C) z^{-k-1}
//         conj((Phi^{-1})') w over the annulus,
// assembled in mode space (the integrand needs the Fourier coefficient of
// order k + 1 of the pointwise product).  F_0 = 0, F_{-k} = conj(F_k).
// truncation, when given, receives the share of the highest retained mode
// in the state, a proxy for convolution truncation error.
std::vector<complexd> noslip_rhs(const VorticityState& w, const VelocityState& vel,
                                 const FarField& far, const MapFactor* map_factor = nullptr,
                                 double* truncation = nullptr);

// Outer fixed point for the no-slip boundary control: starting from u = 0,
// alternately solve the trajectory under the current control and re-evaluate
// the control as noslip_rhs along that trajectory, until the sup difference
// over modes and time nodes drops below control_tol.  The returned
// trajectory is the one the converged control was evaluated on (its own
// control differs by less than control_tol).
ControlSolution solve_noslip_control(const VorticityState& w0, const FarField& far,
                                     double T, double dt, TransformCache& cache,
                                     const SolverOptions& opts = {});

// Independent Crank-Nicolson oracle for the Oseen equation with the uniform
// advecting stream (cx, 0): modes coupled through the stream's |k1| = 1
// coefficients, diffusion implicit per mode with the third-order Robin
// closure, advection explicit (second-order Adams-Bashforth) with centered
// differences on the uniform grid.  Mode cutoff and radial grid are taken
// from w0.
VorticityState oracle_oseen_uniform(const VorticityState& w0, double cx, double t,
                                    int steps, int n_space);

} // namespace vortexbc
