#include "vortexbc/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace vortexbc {

namespace {

// phi1(z) = (1 - e^-z)/z and phi2(z) = (z - 1 + e^-z)/z^2, the exact
// semigroup weights of constant and linear-in-tau Duhamel integrands.  The
// series branch avoids the cancellation below z ~ 1e-2; its truncation error
// is O(z^5), far below double rounding at the switch point.
void phi12(double z, double& p1, double& p2) {
    if (z < 1e-2) {
        p1 = 1.0 + z * (-1.0 / 2.0 + z * (1.0 / 6.0 + z * (-1.0 / 24.0 + z / 120.0)));
        p2 = 0.5 + z * (-1.0 / 6.0 + z * (1.0 / 24.0 + z * (-1.0 / 120.0 + z / 720.0)));
    } else {
        const double e = std::exp(-z);
        p1 = (1.0 - e) / z;
        p2 = (z - 1.0 + e) / (z * z);
    }
}

int validated_steps(const char* who, double T, double dt) {
    if (dt <= 0.0) throw std::invalid_argument(std::string(who) + ": needs dt > 0");
    const long long s = std::llround(T / dt);
    if (s < 1 || std::abs(static_cast<double>(s) * dt - T) > 1e-8 * std::max(1.0, T))
        throw std::invalid_argument(std::string(who) +
                                    ": T must be a whole number of steps of size dt");
    return static_cast<int>(s);
}

double state_l2_diff(const VorticityState& a, const VorticityState& b) {
    const Grid& g = *a.grid;
    std::vector<complexd> diff(static_cast<size_t>(g.size()));
    double acc = 0.0;
    for (int k = -a.N; k <= a.N; ++k) {
        const auto& fa = a.mode(k).values;
        const auto& fb = b.mode(k).values;
        for (int i = 0; i < g.size(); ++i) diff[static_cast<size_t>(i)] = fa[i] - fb[i];
        const double nn = weighted_l2(g, diff);
        acc += nn * nn;
    }
    return std::sqrt(acc);
}

} // namespace

BoundaryControl::BoundaryControl(int N, double t0, double dt, int nodes)
    : N(N), t0(t0), dt(dt),
      samples(static_cast<size_t>(std::max(N, 0)) + 1,
              std::vector<complexd>(static_cast<size_t>(std::max(nodes, 0)), complexd(0.0))) {
    if (N < 0) throw std::invalid_argument("BoundaryControl: negative mode cutoff");
    if (nodes < 2) throw std::invalid_argument("BoundaryControl: needs at least two time nodes");
    if (dt <= 0.0) throw std::invalid_argument("BoundaryControl: needs dt > 0");
}

int BoundaryControl::nodes() const {
    return samples.empty() ? 0 : static_cast<int>(samples[0].size());
}

double BoundaryControl::time(int j) const { return t0 + j * dt; }

double BoundaryControl::t_end() const { return time(nodes() - 1); }

complexd BoundaryControl::value(int k, int j) const {
    const int a = std::abs(k);
    if (a > N) return complexd(0.0);
    if (j < 0 || j >= nodes())
        throw std::out_of_range("BoundaryControl: time index outside the grid");
    const complexd v = samples[static_cast<size_t>(a)][static_cast<size_t>(j)];
    return k >= 0 ? v : std::conj(v);
}

complexd BoundaryControl::value_at(int k, double t) const {
    if (std::abs(k) > N) return complexd(0.0);
    const int last = nodes() - 1;
    const double slack = 1e-9 * std::max(1.0, std::abs(t_end()) + std::abs(t0));
    double y = (t - t0) / dt;
    if (y < -slack / dt || y > last + slack / dt)
        throw std::invalid_argument("BoundaryControl: time outside the grid");
    y = std::clamp(y, 0.0, static_cast<double>(last));
    const int j = std::min(static_cast<int>(y), last - 1);
    const double f = y - j;
    return (1.0 - f) * value(k, j) + f * value(k, j + 1);
}

VorticityState advection_term(const VorticityState& w, const VelocityState& vel) {
    if (w.grid != vel.grid)
        throw std::invalid_argument("advection_term: state and velocity grids differ");
    const Grid& g = *w.grid;
    const int n = g.size();
    VorticityState out(w.N, w.grid);

    std::vector<std::vector<complexd>> dw(static_cast<size_t>(2 * w.N + 1));
    for (int k2 = -w.N; k2 <= w.N; ++k2)
        dw[static_cast<size_t>(k2 + w.N)] = derivative(g, w.mode(k2).values);

    for (int k = -w.N; k <= w.N; ++k) {
        auto& acc = out.mode(k).values;
        const int lo = std::max(-w.N, k - vel.N);
        const int hi = std::min(w.N, k + vel.N);
        for (int k2 = lo; k2 <= hi; ++k2) {
            const auto& vr = vel.vr_mode(k - k2).values;
            const auto& vp = vel.vphi_mode(k - k2).values;
            const auto& wk = w.mode(k2).values;
            const auto& dk = dw[static_cast<size_t>(k2 + w.N)];
            const complexd ik2(0.0, static_cast<double>(k2));
            for (int i = 0; i < n; ++i)
                acc[i] += vr[i] * dk[i] + vp[i] * (ik2 / g.nodes[i]) * wk[i];
        }
    }
    return out;
}

SpectralFunction boundary_forcing_spectrum(const BoundaryControl& u, int k, double t,
                                           TransformCache& cache) {
    if (k < 0 || k > u.N)
        throw std::invalid_argument("boundary_forcing_spectrum: mode outside the control");
    const double slack = 1e-9 * std::max(1.0, std::abs(u.t_end()));
    if (t < u.t0 - slack || t > u.t_end() + slack)
        throw std::invalid_argument("boundary_forcing_spectrum: time outside the control grid");

    const Grid& sg = *cache.spectral_grid();
    const auto& rho = cache.mode_plan(k)->boundary_trace();
    SpectralFunction out(cache.spectral_grid());

    double y = std::clamp((t - u.t0) / u.dt, 0.0, static_cast<double>(u.nodes() - 1));
    const int full = std::min(static_cast<int>(y + 1e-12), u.nodes() - 1);
    const double delta = t - u.time(full);

    for (int j = 0; j < sg.size(); ++j) {
        const double lam2 = sg.nodes[j] * sg.nodes[j];
        double p1, p2;
        phi12(lam2 * u.dt, p1, p2);
        const double E = std::exp(-lam2 * u.dt);
        const double c0 = u.dt * (p1 - p2);
        const double c1 = u.dt * p2;
        complexd I(0.0);
        for (int i = 0; i < full; ++i)
            I = I * E + c0 * u.value(k, i) + c1 * u.value(k, i + 1);
        if (delta > 1e-12 * u.dt) {
            double q1, q2;
            phi12(lam2 * delta, q1, q2);
            I = I * std::exp(-lam2 * delta) + delta * (q1 - q2) * u.value(k, full) +
                delta * q2 * u.value_at(k, t);
        }
        out.values[j] = rho[static_cast<size_t>(j)] * I;
    }
    return out;
}

VorticityState boundary_forcing(const BoundaryControl& u, double t, TransformCache& cache,
                                double* tail_fraction) {
    VorticityState out(u.N, cache.radial_grid());
    double worst = 0.0;
    for (int k = 0; k <= u.N; ++k) {
        SpectralFunction spec = boundary_forcing_spectrum(u, k, t, cache);
        double tail = 0.0;
        RadialFunction b = cache.mode_plan(k)->inverse(spec, &tail);
        worst = std::max(worst, tail);
        for (auto& v : b.values) v = -v;
        out.mode(k) = std::move(b);
    }
    out.mirror_negative_modes();
    if (tail_fraction) *tail_fraction = worst;
    return out;
}

namespace {

// The discrete inverse-transform range carries the r^{-|k|} kernel sector
// only partially (fully for k = 0, logarithmically for |k| = 1, not at all
// for |k| >= 2), so states are held as W^-1[spectra] + c_k chi_k where chi_k
// is the round-trip residue of the unit-moment bump and c_k tracks the mode's
// radial moment through its exact flux law dc_k/dt = -r0^{-|k|} u_k - m_k(adv).
// By linearity the spectra still follow the plain diagonal ETD update.
struct KernelResidues {
    std::vector<RadialFunction> chi; // indexed by |k|
};

KernelResidues kernel_residues(int N, TransformCache& cache) {
    KernelResidues kr;
    kr.chi.reserve(static_cast<size_t>(N) + 1);
    const RadialFunction zero(cache.radial_grid());
    for (int k = 0; k <= N; ++k) {
        PlanPtr plan = cache.mode_plan(k);
        RadialFunction kap = project_moment_free(k, zero, complexd(1.0));
        const RadialFunction rt = plan->inverse(plan->forward(kap));
        for (size_t i = 0; i < kap.values.size(); ++i) kap.values[i] -= rt.values[i];
        kr.chi.push_back(std::move(kap));
    }
    return kr;
}

struct ModeSpectra {
    int N = 0;
    std::vector<std::vector<complexd>> what; // index k + N
    std::vector<complexd> c;                 // radial moments, index k + N
};

ModeSpectra spectra_of(const VorticityState& w, TransformCache& cache, double* tail) {
    ModeSpectra ms;
    ms.N = w.N;
    ms.what.resize(static_cast<size_t>(2 * w.N + 1));
    ms.c.resize(static_cast<size_t>(2 * w.N + 1));
    for (int k = -w.N; k <= w.N; ++k) {
        double tl = 0.0;
        ms.what[static_cast<size_t>(k + w.N)] = cache.mode_plan(k)->forward(w.mode(k), &tl).values;
        ms.c[static_cast<size_t>(k + w.N)] = radial_moment(k, w.mode(k));
        if (tail) *tail = std::max(*tail, tl);
    }
    return ms;
}

VorticityState reconstruct_state(const ModeSpectra& ms, const KernelResidues& kr,
                                 TransformCache& cache, double* tail) {
    VorticityState out(ms.N, cache.radial_grid());
    SpectralFunction sf(cache.spectral_grid());
    for (int k = -ms.N; k <= ms.N; ++k) {
        sf.values = ms.what[static_cast<size_t>(k + ms.N)];
        double tl = 0.0;
        RadialFunction f = cache.mode_plan(k)->inverse(sf, &tl);
        const complexd ck = ms.c[static_cast<size_t>(k + ms.N)];
        const auto& chi = kr.chi[static_cast<size_t>(std::abs(k))].values;
        for (size_t i = 0; i < f.values.size(); ++i) f.values[i] += ck * chi[i];
        out.mode(k) = std::move(f);
        if (tail) *tail = std::max(*tail, tl);
    }
    return out;
}

// Per-step quantities that do not change across Picard iterations: the
// semigroup-propagated spectra, the tau = t advection stage, the exact
// boundary forcing increment, and the tau = t half of the moment flux.
struct OseenStage {
    int N = 0;
    double dt = 0.0;
    std::vector<std::vector<complexd>> base;      // corrector minus the tau = t+dt stage
    std::vector<std::vector<complexd>> predictor; // full ETD1 spectra
    std::vector<complexd> c0;                     // moments at tau = t
    std::vector<complexd> cpred;                  // Euler-predicted moments at t+dt
    std::vector<complexd> rhs1;                   // moment flux at tau = t
    std::vector<complexd> u_end;                  // control samples at t+dt
    std::vector<double> wt2;                      // dt phi2 per spectral node
    double cfl_number = 0.0;
    double tail_fraction = 0.0;
};

OseenStage oseen_stage_one(const ModeSpectra& ms, const VorticityState& w,
                           const VelocityState& vel, const BoundaryControl& u, double t,
                           double dt, TransformCache& cache) {
    if (dt <= 0.0) throw std::invalid_argument("step_oseen: needs dt > 0");
    if (w.grid != cache.radial_grid())
        throw std::invalid_argument("step_oseen: state grid does not match the cache");

    const Grid& rg = *cache.radial_grid();
    const Grid& sg = *cache.spectral_grid();
    const int ns = sg.size();
    const int modes = 2 * w.N + 1;

    OseenStage st;
    st.N = w.N;
    st.dt = dt;
    st.base.assign(static_cast<size_t>(modes), {});
    st.predictor.assign(static_cast<size_t>(modes), {});
    st.c0 = ms.c;
    st.cpred.resize(static_cast<size_t>(modes));
    st.rhs1.resize(static_cast<size_t>(modes));
    st.u_end.resize(static_cast<size_t>(modes));
    st.wt2.resize(static_cast<size_t>(ns));

    std::vector<double> E(static_cast<size_t>(ns)), w01(static_cast<size_t>(ns)),
        w1(static_cast<size_t>(ns));
    for (int j = 0; j < ns; ++j) {
        const double z = sg.nodes[j] * sg.nodes[j] * dt;
        double p1, p2;
        phi12(z, p1, p2);
        E[static_cast<size_t>(j)] = std::exp(-z);
        w1[static_cast<size_t>(j)] = dt * p1;
        w01[static_cast<size_t>(j)] = dt * (p1 - p2);
        st.wt2[static_cast<size_t>(j)] = dt * p2;
    }

    VorticityState adv = advection_term(w, vel);
    for (int k = -w.N; k <= w.N; ++k) {
        PlanPtr plan = cache.mode_plan(k);
        const size_t sk = static_cast<size_t>(k + w.N);
        double ta = 0.0;
        SpectralFunction nhat = plan->forward(adv.mode(k), &ta);
        st.tail_fraction = std::max(st.tail_fraction, ta);

        const auto& rho = plan->boundary_trace();
        const complexd u0 = u.value_at(k, t);
        const complexd u1 = u.value_at(k, t + dt);
        st.u_end[sk] = u1;

        const int a = std::abs(k);
        st.rhs1[sk] = -std::pow(rg.a, -a) * u0 - integrate_xpow(rg, adv.mode(k).values, 1.0 - a);
        st.cpred[sk] = st.c0[sk] + dt * st.rhs1[sk];

        const auto& what = ms.what[sk];
        auto& bs = st.base[sk];
        auto& ps = st.predictor[sk];
        bs.resize(static_cast<size_t>(ns));
        ps.resize(static_cast<size_t>(ns));
        for (int j = 0; j < ns; ++j) {
            const size_t sj = static_cast<size_t>(j);
            const complexd finc = rho[sj] * (w01[sj] * u0 + st.wt2[sj] * u1);
            const complexd drift = E[sj] * what[sj] - finc;
            bs[sj] = drift - w01[sj] * nhat.values[j];
            ps[sj] = drift - w1[sj] * nhat.values[j];
        }
    }

    double h_min = rg.edges[1] - rg.edges[0];
    for (int p = 1; p < rg.panels(); ++p)
        h_min = std::min(h_min, rg.edges[static_cast<size_t>(p) + 1] -
                                    rg.edges[static_cast<size_t>(p)]);
    std::vector<double> speed(static_cast<size_t>(rg.size()), 0.0);
    for (int k = -vel.N; k <= vel.N; ++k) {
        const auto& vr = vel.vr_mode(k).values;
        const auto& vp = vel.vphi_mode(k).values;
        for (int i = 0; i < rg.size(); ++i)
            speed[static_cast<size_t>(i)] += std::abs(vr[i]) + std::abs(vp[i]);
    }
    st.cfl_number = dt * *std::max_element(speed.begin(), speed.end()) / h_min;
    return st;
}

ModeSpectra predictor_spectra(OseenStage& st) {
    ModeSpectra ms;
    ms.N = st.N;
    ms.what = std::move(st.predictor);
    ms.c = st.cpred;
    return ms;
}

ModeSpectra oseen_corrector(const OseenStage& st, const VorticityState& w_end,
                            const VelocityState& vel_end, TransformCache& cache,
                            double* tail) {
    const Grid& rg = *cache.radial_grid();
    VorticityState adv = advection_term(w_end, vel_end);
    const int ns = cache.spectral_grid()->size();
    ModeSpectra out;
    out.N = st.N;
    out.what.resize(static_cast<size_t>(2 * st.N + 1));
    out.c.resize(static_cast<size_t>(2 * st.N + 1));
    for (int k = -st.N; k <= st.N; ++k) {
        PlanPtr plan = cache.mode_plan(k);
        const size_t sk = static_cast<size_t>(k + st.N);
        double ta = 0.0;
        SpectralFunction nhat = plan->forward(adv.mode(k), &ta);
        if (tail) *tail = std::max(*tail, ta);
        const auto& bs = st.base[sk];
        auto& dst = out.what[sk];
        dst.resize(static_cast<size_t>(ns));
        for (int j = 0; j < ns; ++j)
            dst[static_cast<size_t>(j)] =
                bs[static_cast<size_t>(j)] - st.wt2[static_cast<size_t>(j)] * nhat.values[j];
        const int a = std::abs(k);
        const complexd rhs2 =
            -std::pow(rg.a, -a) * st.u_end[sk] - integrate_xpow(rg, adv.mode(k).values, 1.0 - a);
        out.c[sk] = st.c0[sk] + 0.5 * st.dt * (st.rhs1[sk] + rhs2);
    }
    return out;
}

} // namespace

VorticityState step_oseen(const VorticityState& w, const VelocityState& vel,
                          const BoundaryControl& u, double t, double dt,
                          TransformCache& cache, OseenStepReport* report) {
    const KernelResidues kr = kernel_residues(w.N, cache);
    double tail = 0.0;
    const ModeSpectra ms = spectra_of(w, cache, &tail);
    OseenStage st = oseen_stage_one(ms, w, vel, u, t, dt, cache);
    tail = std::max(tail, st.tail_fraction);
    VorticityState pred = reconstruct_state(predictor_spectra(st), kr, cache, &tail);
    ModeSpectra corr = oseen_corrector(st, pred, vel, cache, &tail);
    VorticityState out = reconstruct_state(corr, kr, cache, &tail);
    if (report) {
        report->cfl_number = st.cfl_number;
        report->cfl_warning = st.cfl_number > 1.0;
        report->tail_fraction = tail;
    }
    return out;
}

TrajectoryRecord solve_helmholtz(const VorticityState& w0, const FarField& far,
                                 const BoundaryControl& u, double T, double dt,
                                 TransformCache& cache, const SolverOptions& opts) {
    const int steps = validated_steps("solve_helmholtz", T, dt);
    if (w0.grid != cache.radial_grid())
        throw std::invalid_argument("solve_helmholtz: state grid does not match the cache");
    if (u.t0 > 1e-12 || u.t_end() < T - 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("solve_helmholtz: control grid does not cover [0, T]");
    if (opts.picard_max_iter < 1)
        throw std::invalid_argument("solve_helmholtz: needs picard_max_iter >= 1");

    TrajectoryRecord rec;
    rec.times.push_back(0.0);
    rec.states.push_back(w0);

    const KernelResidues kr = kernel_residues(w0.N, cache);
    VorticityState w = w0;
    ModeSpectra ms = spectra_of(w, cache, nullptr);
    VelocityState vel = reconstruct_velocity(w, far);
    int stalled = 0;
    for (int s = 0; s < steps; ++s) {
        const double t = s * dt;
        OseenStage st = oseen_stage_one(ms, w, vel, u, t, dt, cache);
        double tail = st.tail_fraction;
        ModeSpectra next_ms = predictor_spectra(st);
        VorticityState iter = reconstruct_state(next_ms, kr, cache, &tail);

        StepDiagnostics diag;
        diag.cfl_number = st.cfl_number;
        double delta_prev = 0.0, delta = 0.0;
        for (int j = 1; j <= opts.picard_max_iter; ++j) {
            VelocityState vj = reconstruct_velocity(iter, far);
            next_ms = oseen_corrector(st, iter, vj, cache, &tail);
            VorticityState next = reconstruct_state(next_ms, kr, cache, &tail);
            delta = state_l2_diff(next, iter);
            if (j >= 2 && delta_prev > 0.0) diag.contraction = delta / delta_prev;
            delta_prev = delta;
            diag.picard_iterations = j;
            iter = std::move(next);
            if (delta < opts.picard_tol) break;
        }
        if (delta >= opts.picard_tol && diag.contraction >= 1.0) {
            if (++stalled >= 3)
                throw std::runtime_error(
                    "solve_helmholtz: Picard iteration stopped contracting for three "
                    "consecutive steps; data outside the small-data regime");
        } else {
            stalled = 0;
        }

        ms = std::move(next_ms);
        w = std::move(iter);
        vel = reconstruct_velocity(w, far);
        diag.tail_fraction = tail;
        diag.boundary_velocity = boundary_velocity_norm(vel, w.N);
        for (complexd r : manifold_residual(w, far))
            diag.manifold_residual_max = std::max(diag.manifold_residual_max, std::abs(r));

        rec.times.push_back(t + dt);
        rec.states.push_back(w);
        rec.diagnostics.push_back(diag);
    }
    return rec;
}

std::vector<complexd> noslip_rhs(const VorticityState& w, const VelocityState& vel,
                                 const FarField& far, const MapFactor* map_factor,
                                 double* truncation) {
    if (w.grid != vel.grid)
        throw std::invalid_argument("noslip_rhs: state and velocity grids differ");
    const Grid& g = *w.grid;
    const int n = g.size();
    const int N = w.N;
    const double r0 = g.a;

    // Complex-velocity deficit modes: v^C = (v_r + i v_phi) e^{i phi} puts
    // the pair (v_{r,k1}, v_{phi,k1}) at angular index m = k1 + 1, and the
    // far-field stream contributes only at m = 0.
    const int dlo = -vel.N + 1, dhi = vel.N + 1;
    std::vector<std::vector<complexd>> d(static_cast<size_t>(dhi - dlo + 1),
                                         std::vector<complexd>(static_cast<size_t>(n)));
    for (int m = dlo; m <= dhi; ++m) {
        auto& dst = d[static_cast<size_t>(m - dlo)];
        const auto& vr = vel.vr_mode(m - 1).values;
        const auto& vp = vel.vphi_mode(m - 1).values;
        const complexd far0 = m == 0 ? complexd(far.vx, far.vy) : complexd(0.0);
        for (int i = 0; i < n; ++i) dst[static_cast<size_t>(i)] = far0 - (vr[i] + complexd(0.0, 1.0) * vp[i]);
    }

    const int mm = map_factor ? static_cast<int>(map_factor->modes.size()) - 1 : 0;
    if (map_factor && mm < 0)
        throw std::invalid_argument("noslip_rhs: empty map factor");

    // E_m = (d conv w)_m for every index the map convolution can pull back
    // into the needed range q = k + 1, k in [1, N].
    const int elo = 2 - mm, ehi = N + 1;
    std::vector<std::vector<complexd>> E(static_cast<size_t>(ehi - elo + 1),
                                         std::vector<complexd>(static_cast<size_t>(n)));
    for (int m = elo; m <= ehi; ++m) {
        auto& dst = E[static_cast<size_t>(m - elo)];
        for (int m3 = std::max(-N, m - dhi); m3 <= std::min(N, m - dlo); ++m3) {
            const auto& dm = d[static_cast<size_t>(m - m3 - dlo)];
            const auto& wm = w.mode(m3).values;
            for (int i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += dm[static_cast<size_t>(i)] * wm[i];
        }
    }

    std::vector<complexd> F(static_cast<size_t>(2 * N + 1), complexd(0.0));
    std::vector<complexd> G(static_cast<size_t>(n));
    for (int k = 1; k <= N; ++k) {
        const int q = k + 1;
        std::fill(G.begin(), G.end(), complexd(0.0));
        for (int m2 = 0; m2 <= mm; ++m2) {
            const auto& em = E[static_cast<size_t>(q - m2 - elo)];
            if (map_factor) {
                const auto& mu = map_factor->modes[static_cast<size_t>(m2)].values;
                for (int i = 0; i < n; ++i) G[static_cast<size_t>(i)] += mu[i] * em[static_cast<size_t>(i)];
            } else {
                for (int i = 0; i < n; ++i) G[static_cast<size_t>(i)] += em[static_cast<size_t>(i)];
            }
        }
        const complexd Fk =
            static_cast<double>(k) * std::pow(r0, k) * integrate_xpow(g, G, -k);
        F[static_cast<size_t>(k + N)] = Fk;
        F[static_cast<size_t>(-k + N)] = std::conj(Fk);
    }

    if (truncation) {
        double top = 0.0, all = 0.0;
        for (int k = -N; k <= N; ++k) {
            const double nk = weighted_l2(g, w.mode(k).values);
            all = std::max(all, nk);
            if (std::abs(k) == N) top = std::max(top, nk);
        }
        *truncation = all > 0.0 ? top / all : 0.0;
    }
    return F;
}

ControlSolution solve_noslip_control(const VorticityState& w0, const FarField& far,
                                     double T, double dt, TransformCache& cache,
                                     const SolverOptions& opts) {
    const int steps = validated_steps("solve_noslip_control", T, dt);
    const int nc = opts.control_modes < 0 ? w0.N : opts.control_modes;

    ControlSolution sol;
    BoundaryControl u(nc, 0.0, dt, steps + 1);
    for (int outer = 1; outer <= opts.control_max_outer; ++outer) {
        TrajectoryRecord rec = solve_helmholtz(w0, far, u, T, dt, cache, opts);
        BoundaryControl next(nc, 0.0, dt, steps + 1);
        double delta = 0.0;
        for (int m = 0; m <= steps; ++m) {
            const VorticityState& ws = rec.states[static_cast<size_t>(m)];
            VelocityState vs = reconstruct_velocity(ws, far);
            const std::vector<complexd> F = noslip_rhs(ws, vs, far);
            for (int k = 0; k <= nc; ++k) {
                const complexd fk = k <= ws.N ? F[static_cast<size_t>(k + ws.N)] : complexd(0.0);
                next.samples[static_cast<size_t>(k)][static_cast<size_t>(m)] = fk;
                delta = std::max(delta,
                                 std::abs(fk - u.samples[static_cast<size_t>(k)][static_cast<size_t>(m)]));
            }
        }
        sol.outer_deltas.push_back(delta);
        sol.outer_iterations = outer;
        u = std::move(next);
        if (delta < opts.control_tol) {
            sol.control = std::move(u);
            sol.trajectory = std::move(rec);
            return sol;
        }
    }
    throw std::runtime_error(
        "solve_noslip_control: control updates did not contract within max_outer passes");
}

VorticityState oracle_oseen_uniform(const VorticityState& w0, double cx, double t,
                                    int steps, int n_space) {
    if (steps < 64) throw std::invalid_argument("oracle_oseen_uniform: needs steps >= 64");
    if (n_space < 16) throw std::invalid_argument("oracle_oseen_uniform: needs n_space >= 16");
    const Grid& g = *w0.grid;
    const int N = w0.N;
    const double r0 = g.a;
    const int n = n_space;
    const double h = (g.b - r0) / (n - 1);
    const double dt = t / steps;
    const int modes = 2 * N + 1;

    std::vector<std::vector<complexd>> W(static_cast<size_t>(modes),
                                         std::vector<complexd>(static_cast<size_t>(n)));
    for (int k = -N; k <= N; ++k) {
        auto& wm = W[static_cast<size_t>(k + N)];
        for (int i = 0; i < n; ++i) wm[static_cast<size_t>(i)] = interpolate(g, w0.mode(k).values, r0 + i * h);
        wm[static_cast<size_t>(n - 1)] = complexd(0.0);
    }

    // Per-mode Crank-Nicolson setup, identical to the pure-diffusion oracle:
    // third-order one-sided Robin closure folded into row 1 and the spare
    // w_3 entry eliminated against row 2.
    struct CnMode {
        double bc = 0.0, ext = 0.0, celim = 0.0;
        std::vector<double> dia, sub, sup, ls, ld, lu, cp;
    };
    const int m = n - 2;
    std::vector<CnMode> cn(static_cast<size_t>(modes));
    for (int k = -N; k <= N; ++k) {
        CnMode& c = cn[static_cast<size_t>(k + N)];
        const int a = std::abs(k);
        c.bc = 1.0 / (11.0 - 6.0 * h * a / r0);
        c.sub.assign(static_cast<size_t>(n), 0.0);
        c.dia.assign(static_cast<size_t>(n), 0.0);
        c.sup.assign(static_cast<size_t>(n), 0.0);
        for (int i = 1; i < n - 1; ++i) {
            const double r = r0 + i * h;
            c.sub[static_cast<size_t>(i)] = 1.0 / (h * h) - 1.0 / (2.0 * h * r);
            c.dia[static_cast<size_t>(i)] = -2.0 / (h * h) - static_cast<double>(a) * a / (r * r);
            c.sup[static_cast<size_t>(i)] = 1.0 / (h * h) + 1.0 / (2.0 * h * r);
        }
        c.ext = c.sub[1] * 2.0 * c.bc;
        c.dia[1] += c.sub[1] * 18.0 * c.bc;
        c.sup[1] -= c.sub[1] * 9.0 * c.bc;
        c.sub[1] = 0.0;
        c.sup[static_cast<size_t>(n - 2)] = 0.0;

        c.ls.resize(static_cast<size_t>(m));
        c.ld.resize(static_cast<size_t>(m));
        c.lu.resize(static_cast<size_t>(m));
        c.cp.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            c.ls[static_cast<size_t>(i)] = -0.5 * dt * c.sub[static_cast<size_t>(i + 1)];
            c.ld[static_cast<size_t>(i)] = 1.0 - 0.5 * dt * c.dia[static_cast<size_t>(i + 1)];
            c.lu[static_cast<size_t>(i)] = -0.5 * dt * c.sup[static_cast<size_t>(i + 1)];
        }
        const double bulge = -0.5 * dt * c.ext;
        c.celim = bulge / c.lu[1];
        c.ld[0] -= c.celim * c.ls[1];
        c.lu[0] -= c.celim * c.ld[1];
        c.cp[0] = c.lu[0] / c.ld[0];
        for (int i = 1; i < m; ++i)
            c.cp[static_cast<size_t>(i)] =
                c.lu[static_cast<size_t>(i)] /
                (c.ld[static_cast<size_t>(i)] - c.ls[static_cast<size_t>(i)] * c.cp[static_cast<size_t>(i - 1)]);
    }
    auto boundary_value = [&](int mi) {
        const CnMode& c = cn[static_cast<size_t>(mi)];
        auto& wm = W[static_cast<size_t>(mi)];
        wm[0] = c.bc * (18.0 * wm[1] - 9.0 * wm[2] + 2.0 * wm[3]);
    };
    for (int mi = 0; mi < modes; ++mi) boundary_value(mi);

    // Uniform stream (cx, 0): v_{r,+-1} = cx/2, v_{phi,+-1} = +- i cx/2.
    // The advection term couples neighbouring modes; it stays explicit
    // (Adams-Bashforth after the first step) with centered differences.
    auto advection = [&](std::vector<std::vector<complexd>>& out) {
        for (int k = -N; k <= N; ++k) {
            auto& dst = out[static_cast<size_t>(k + N)];
            std::fill(dst.begin(), dst.end(), complexd(0.0));
            for (int k1 = -1; k1 <= 1; k1 += 2) {
                const int k2 = k - k1;
                if (std::abs(k2) > N) continue;
                const auto& wm = W[static_cast<size_t>(k2 + N)];
                const complexd vp(0.0, k1 * cx / 2.0);
                for (int i = 1; i < n - 1; ++i) {
                    const double r = r0 + i * h;
                    const complexd dwdr = (wm[static_cast<size_t>(i + 1)] - wm[static_cast<size_t>(i - 1)]) / (2.0 * h);
                    dst[static_cast<size_t>(i - 1)] +=
                        (cx / 2.0) * dwdr +
                        vp * complexd(0.0, static_cast<double>(k2)) / r * wm[static_cast<size_t>(i)];
                }
            }
        }
    };

    std::vector<std::vector<complexd>> adv(static_cast<size_t>(modes),
                                           std::vector<complexd>(static_cast<size_t>(m)));
    std::vector<std::vector<complexd>> adv_prev = adv;
    std::vector<complexd> rhs(static_cast<size_t>(m)), dp(static_cast<size_t>(m));
    for (int s = 0; s < steps; ++s) {
        advection(adv);
        for (int mi = 0; mi < modes; ++mi) {
            const CnMode& c = cn[static_cast<size_t>(mi)];
            auto& wm = W[static_cast<size_t>(mi)];
            const auto& am = adv[static_cast<size_t>(mi)];
            const auto& ap = adv_prev[static_cast<size_t>(mi)];

            rhs[0] = wm[1] + 0.5 * dt * (c.dia[1] * wm[1] + c.sup[1] * wm[2] + c.ext * wm[3]);
            for (int i = 2; i < n - 1; ++i)
                rhs[static_cast<size_t>(i - 1)] =
                    wm[static_cast<size_t>(i)] +
                    0.5 * dt *
                        (c.sub[static_cast<size_t>(i)] * wm[static_cast<size_t>(i - 1)] +
                         c.dia[static_cast<size_t>(i)] * wm[static_cast<size_t>(i)] +
                         c.sup[static_cast<size_t>(i)] * wm[static_cast<size_t>(i + 1)]);
            for (int i = 0; i < m; ++i) {
                const complexd ab = s == 0 ? am[static_cast<size_t>(i)]
                                           : 1.5 * am[static_cast<size_t>(i)] - 0.5 * ap[static_cast<size_t>(i)];
                rhs[static_cast<size_t>(i)] -= dt * ab;
            }
            rhs[0] -= c.celim * rhs[1];

            dp[0] = rhs[0] / c.ld[0];
            for (int i = 1; i < m; ++i)
                dp[static_cast<size_t>(i)] =
                    (rhs[static_cast<size_t>(i)] - c.ls[static_cast<size_t>(i)] * dp[static_cast<size_t>(i - 1)]) /
                    (c.ld[static_cast<size_t>(i)] - c.ls[static_cast<size_t>(i)] * c.cp[static_cast<size_t>(i - 1)]);
            wm[static_cast<size_t>(n - 2)] = dp[static_cast<size_t>(m - 1)];
            for (int i = m - 2; i >= 0; --i)
                wm[static_cast<size_t>(i + 1)] = dp[static_cast<size_t>(i)] - c.cp[static_cast<size_t>(i)] * wm[static_cast<size_t>(i + 2)];
        }
        for (int mi = 0; mi < modes; ++mi) boundary_value(mi);
        std::swap(adv, adv_prev);
    }

    VorticityState out(N, w0.grid);
    for (int k = -N; k <= N; ++k) {
        const auto& wm = W[static_cast<size_t>(k + N)];
        auto& dst = out.mode(k).values;
        for (int i = 0; i < g.size(); ++i) {
            const double x = (g.nodes[i] - r0) / h;
            const int j = std::clamp(static_cast<int>(x) - 1, 0, n - 4);
            const double uu = x - j;
            complexd acc(0.0);
            for (int p = 0; p < 4; ++p) {
                double cc = 1.0;
                for (int q = 0; q < 4; ++q)
                    if (q != p) cc *= (uu - q) / (p - q);
                acc += cc * wm[static_cast<size_t>(j + p)];
            }
            dst[i] = acc;
        }
    }
    return out;
}

} // namespace vortexbc
