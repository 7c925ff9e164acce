#include "vortexbc/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace vortexbc {

namespace {

bool finite(complexd v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

// Number of b_n terms evaluation actually uses.
int used_terms(const ConformalMap& map) {
    return std::min(static_cast<int>(map.b.size()), map.n_max);
}

void check_map_grid(const ConformalMap& map, const Grid& g, const char* who) {
    if (std::abs(g.a - map.r0) > 1e-12 * std::max(1.0, map.r0))
        throw std::invalid_argument(std::string(who) +
                                    ": grid inner radius differs from the map's r0");
}

// Smallest power-of-two ring whose Nyquist index exceeds the requested
// harmonic span.
int ring_size(int span) {
    int ring = 8;
    while (ring < 2 * span + 2) ring <<= 1;
    return ring;
}

// Angular harmonics mu_m(r), m in [m_lo, m_hi], of a pointwise function of
// the map derivative, extracted on the circle through every radial node by
// a discrete transform over one shared ring.  Twiddles come from a single
// table of ring-th roots so conjugate-symmetric fields produce exactly
// conjugate harmonic pairs.  Harmonics whose sup over nodes falls below
// 1e-12 of the largest are returned empty (exactly zero): the identity map
// keeps only the constant one.
template <typename F>
std::vector<std::vector<complexd>> ring_harmonics(const ConformalMap& map, const Grid& g,
                                                  int m_lo, int m_hi, F factor) {
    const int ring = ring_size(std::max(m_hi, -m_lo));
    const int n = g.size();
    const int nm = m_hi - m_lo + 1;

    std::vector<complexd> tw(static_cast<size_t>(ring));
    for (int j = 0; j < ring; ++j)
        tw[static_cast<size_t>(j)] = std::polar(1.0, -2.0 * M_PI * j / ring);

    std::vector<std::vector<complexd>> mu(
        static_cast<size_t>(nm), std::vector<complexd>(static_cast<size_t>(n), complexd(0.0)));

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double r = g.nodes[i];
        std::vector<complexd> f(static_cast<size_t>(ring));
        for (int j = 0; j < ring; ++j) {
            const complexd z = std::polar(r, 2.0 * M_PI * j / ring);
            f[static_cast<size_t>(j)] = factor(eval_inverse_map_derivative(map, z));
        }
        for (int m = m_lo; m <= m_hi; ++m) {
            complexd acc(0.0);
            for (int j = 0; j < ring; ++j) {
                const long long t = ((static_cast<long long>(m) * j) % ring + ring) % ring;
                acc += f[static_cast<size_t>(j)] * tw[static_cast<size_t>(t)];
            }
            mu[static_cast<size_t>(m - m_lo)][static_cast<size_t>(i)] =
                acc / static_cast<double>(ring);
        }
    }

    std::vector<double> amp(static_cast<size_t>(nm), 0.0);
    double top = 0.0;
    for (int q = 0; q < nm; ++q) {
        for (const complexd& v : mu[static_cast<size_t>(q)])
            amp[static_cast<size_t>(q)] = std::max(amp[static_cast<size_t>(q)], std::abs(v));
        top = std::max(top, amp[static_cast<size_t>(q)]);
    }
    for (int q = 0; q < nm; ++q)
        if (amp[static_cast<size_t>(q)] <= 1e-12 * top) mu[static_cast<size_t>(q)].clear();
    return mu;
}

// Factor-series mass at r0 the source extraction cannot represent: terms
// beyond the evaluation truncation plus terms at or above the ring size,
// which fold back onto the retained harmonics.
double alias_mass(const ConformalMap& map, int ring) {
    const size_t lo = static_cast<size_t>(std::min<long long>(ring, used_terms(map) + 2));
    double tail = 0.0;
    for (size_t nn = lo; nn < map.c.size(); ++nn)
        tail += std::abs(map.c[nn]) * std::pow(map.r0, -static_cast<double>(nn));
    return tail;
}

// Velocity modes from already transformed sources; the disc loop with the
// inner/outer integrands split between the two source combinations.
VelocityState velocity_from_sources(const MappedSources& src, const FarField& far,
                                    double* tail_out, double* l1_out) {
    const Grid& g = *src.grid;
    const int n = g.size();
    VelocityState v(src.N, src.grid);

    double tail_max = 0.0;
    double l1_tail = 0.0;

#pragma omp parallel for schedule(dynamic) reduction(max : tail_max, l1_tail)
    for (int idx = 0; idx < 2 * src.N + 1; ++idx) {
        const int k = idx - src.N;
        const int a = std::abs(k);
        const auto& qk = src.q_modes[static_cast<size_t>(idx)].values;
        const auto& rk = src.r_modes[static_cast<size_t>(idx)].values;
        const complexd isgn =
            (k > 0) ? complexd(0.0, 1.0) : (k < 0 ? complexd(0.0, -1.0) : complexd(0.0));

        std::vector<complexd> fin(static_cast<size_t>(n)), fout(static_cast<size_t>(n)),
            houter(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            double r = g.nodes[i];
            houter[static_cast<size_t>(i)] = qk[static_cast<size_t>(i)] + isgn * rk[static_cast<size_t>(i)];
            fin[static_cast<size_t>(i)] =
                std::pow(r, a + 1) * (qk[static_cast<size_t>(i)] - isgn * rk[static_cast<size_t>(i)]);
            fout[static_cast<size_t>(i)] = std::pow(r, 1 - a) * houter[static_cast<size_t>(i)];
        }
        std::vector<complexd> cin = cumulative_from_start(g, fin);
        std::vector<complexd> cout = cumulative_to_end(g, fout);

        const complexd vr_inf = far.r_coeff(k);
        const complexd vphi_inf = far.phi_coeff(k);
        const complexd half_i_sgn = 0.5 * isgn;

        auto& vrk = v.vr[static_cast<size_t>(idx)].values;
        auto& vpk = v.vphi[static_cast<size_t>(idx)].values;
        for (int i = 0; i < n; ++i) {
            double r = g.nodes[i];
            complexd in_part = std::pow(r, -a - 1) * cin[static_cast<size_t>(i)];
            complexd out_part = std::pow(r, a - 1) * cout[static_cast<size_t>(i)];
            vrk[static_cast<size_t>(i)] = half_i_sgn * (in_part + out_part) + vr_inf;
            vpk[static_cast<size_t>(i)] = 0.5 * (in_part - out_part) + vphi_inf;
        }

        tail_max = std::max(tail_max, tail_fraction(g, houter, 1.0 - a));
        if (a <= 1) l1_tail = std::max(l1_tail, tail_fraction(g, houter, 1.0));
    }

    if (tail_out) *tail_out = tail_max;
    if (l1_out) *l1_out = l1_tail;
    return v;
}

std::vector<complexd> residuals_from_sources(const MappedSources& src, const FarField& far) {
    const Grid& g = *src.grid;
    const double r0 = g.a;
    const int n = g.size();
    std::vector<complexd> res(static_cast<size_t>(src.N) + 1);
    std::vector<complexd> Ak(static_cast<size_t>(n));
    for (int k = 0; k <= src.N; ++k) {
        const auto& qk = src.q_mode(k).values;
        const auto& rk = src.r_mode(k).values;
        for (int i = 0; i < n; ++i)
            Ak[static_cast<size_t>(i)] =
                qk[static_cast<size_t>(i)] + complexd(0.0, 1.0) * rk[static_cast<size_t>(i)];
        res[static_cast<size_t>(k)] = integrate_xpow(g, Ak, 1.0 - k) -
                                      2.0 * far.phi_coeff(k) * std::pow(r0, 1 - k);
    }
    return res;
}

// phi1(z) = (1 - e^-z)/z and phi2(z) = (z - 1 + e^-z)/z^2, the exact
// semigroup weights of constant and linear-in-tau Duhamel integrands.  The
// series branch avoids the cancellation below z ~ 1e-2.
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

} // namespace

ConformalMap::ConformalMap() : ConformalMap(1.0) {}

ConformalMap::ConformalMap(double r0_, std::vector<complexd> b_, int n_max_)
    : r0(r0_), b(std::move(b_)), n_max(n_max_) {
    if (!(r0 > 0.0) || !std::isfinite(r0))
        throw std::invalid_argument("ConformalMap: needs r0 > 0");
    if (n_max < 1) throw std::invalid_argument("ConformalMap: needs n_max >= 1");
    for (const complexd& bn : b)
        if (!finite(bn)) throw std::invalid_argument("ConformalMap: non-finite coefficient");

    c.assign(b.size() + 2, complexd(0.0));
    c[0] = complexd(1.0);
    for (size_t nn = 2; nn < c.size(); ++nn)
        c[nn] = -static_cast<double>(nn - 1) * b[nn - 2];

    double margin = 0.0;
    for (size_t nn = 2; nn < c.size(); ++nn)
        margin += std::abs(c[nn]) * std::pow(r0, -static_cast<double>(nn));
    if (margin >= 1.0)
        throw std::invalid_argument(
            "ConformalMap: derivative series reaches zero on |z| = r0; coefficients too large");
}

bool ConformalMap::is_identity() const {
    for (int nn = 0; nn < used_terms(*this); ++nn)
        if (b[static_cast<size_t>(nn)] != complexd(0.0)) return false;
    return true;
}

double ConformalMap::series_tail(double r) const {
    double tail = 0.0;
    for (size_t nn = static_cast<size_t>(n_max); nn < b.size(); ++nn)
        tail += std::abs(b[nn]) * std::pow(r, -static_cast<double>(nn + 1));
    return tail;
}

complexd eval_inverse_map(const ConformalMap& map, complexd z, double* tail) {
    const double za = std::abs(z);
    if (za < map.r0 * (1.0 - 1e-12))
        throw std::domain_error("eval_inverse_map: |z| < r0 is outside the map domain");
    const complexd zinv = 1.0 / z;
    complexd acc = z, p = complexd(1.0);
    const int nb = used_terms(map);
    for (int nn = 1; nn <= nb; ++nn) {
        p *= zinv;
        acc += map.b[static_cast<size_t>(nn - 1)] * p;
    }
    if (tail) *tail = map.series_tail(za);
    return acc;
}

complexd eval_inverse_map_derivative(const ConformalMap& map, complexd z, double* tail) {
    const double za = std::abs(z);
    if (za < map.r0 * (1.0 - 1e-12))
        throw std::domain_error("eval_inverse_map_derivative: |z| < r0 is outside the map domain");
    const complexd zinv = 1.0 / z;
    complexd acc = complexd(1.0), p = zinv;
    const int nc = used_terms(map) + 1;
    for (int nn = 2; nn <= nc; ++nn) {
        p *= zinv;
        acc += map.c[static_cast<size_t>(nn)] * p;
    }
    if (tail) {
        double dtail = 0.0;
        for (size_t nn = static_cast<size_t>(nc) + 1; nn < map.c.size(); ++nn)
            dtail += std::abs(map.c[nn]) * std::pow(za, -static_cast<double>(nn));
        *tail = dtail;
    }
    return acc;
}

RadialFunction& MappedSources::r_mode(int k) {
    return r_modes[static_cast<size_t>(k + N)];
}
const RadialFunction& MappedSources::r_mode(int k) const {
    return r_modes[static_cast<size_t>(k + N)];
}
RadialFunction& MappedSources::q_mode(int k) {
    return q_modes[static_cast<size_t>(k + N)];
}
const RadialFunction& MappedSources::q_mode(int k) const {
    return q_modes[static_cast<size_t>(k + N)];
}

MappedSources transform_sources(const ConformalMap& map, const VorticityState& w) {
    if (!w.grid) throw std::invalid_argument("transform_sources: state has no grid");
    const Grid& g = *w.grid;
    check_map_grid(map, g, "transform_sources");
    const int N = w.N;
    const int n = g.size();

    const auto mu =
        ring_harmonics(map, g, 0, 2 * N, [](complexd G) { return std::conj(G); });

    // A_k = [conj((Phi^{-1})') w]_k; only m >= 0 harmonics exist, so the
    // convolution closes over the state's own modes.
    std::vector<std::vector<complexd>> A(static_cast<size_t>(2 * N + 1),
                                         std::vector<complexd>(static_cast<size_t>(n),
                                                               complexd(0.0)));
    for (int k = -N; k <= N; ++k) {
        auto& Ak = A[static_cast<size_t>(k + N)];
        for (int m = std::max(0, k - N); m <= k + N; ++m) {
            const auto& mum = mu[static_cast<size_t>(m)];
            if (mum.empty()) continue;
            const auto& wm = w.mode(k - m).values;
            for (int i = 0; i < n; ++i)
                Ak[static_cast<size_t>(i)] += mum[static_cast<size_t>(i)] * wm[i];
        }
    }

    MappedSources out;
    out.N = N;
    out.grid = w.grid;
    out.r_modes.assign(static_cast<size_t>(2 * N + 1), RadialFunction(w.grid));
    out.q_modes.assign(static_cast<size_t>(2 * N + 1), RadialFunction(w.grid));
    for (int k = -N; k <= N; ++k) {
        const auto& Ak = A[static_cast<size_t>(k + N)];
        const auto& Amk = A[static_cast<size_t>(-k + N)];
        auto& qk = out.q_mode(k).values;
        auto& rk = out.r_mode(k).values;
        for (int i = 0; i < n; ++i) {
            const complexd ap = Ak[static_cast<size_t>(i)];
            const complexd am = std::conj(Amk[static_cast<size_t>(i)]);
            qk[static_cast<size_t>(i)] = 0.5 * (ap + am);
            rk[static_cast<size_t>(i)] = complexd(0.0, -0.5) * (ap - am);
        }
    }

    out.alias_tail = alias_mass(map, ring_size(2 * N));
    out.alias_warning = out.alias_tail > 1e-8;
    return out;
}

VelocityState mapped_reconstruct_velocity(const ConformalMap& map, const VorticityState& w,
                                          const FarField& far, BiotSavartReport* report) {
    MappedSources src = transform_sources(map, w);
    double tail = 0.0, l1 = 0.0;
    VelocityState v = velocity_from_sources(src, far, &tail, &l1);
    if (report) {
        report->tail_fraction = tail;
        report->l1_tail = l1;
        report->circulation = mapped_circulation(map, w);
    }
    return v;
}

complexd mapped_moment(const ConformalMap& map, int k, const VorticityState& w) {
    if (k < 0) throw std::invalid_argument("mapped_moment: needs k >= 0");
    if (k > w.N) throw std::invalid_argument("mapped_moment: mode out of range");
    MappedSources src = transform_sources(map, w);
    const Grid& g = *w.grid;
    const auto& qk = src.q_mode(k).values;
    const auto& rk = src.r_mode(k).values;
    std::vector<complexd> Ak(qk.size());
    for (size_t i = 0; i < qk.size(); ++i) Ak[i] = qk[i] + complexd(0.0, 1.0) * rk[i];
    return integrate_xpow(g, Ak, 1.0 - k);
}

std::vector<complexd> mapped_manifold_residual(const ConformalMap& map,
                                               const VorticityState& w, const FarField& far) {
    return residuals_from_sources(transform_sources(map, w), far);
}

double mapped_circulation(const ConformalMap& map, const VorticityState& w) {
    if (!w.grid) throw std::invalid_argument("mapped_circulation: state has no grid");
    const Grid& g = *w.grid;
    check_map_grid(map, g, "mapped_circulation");
    const int N = w.N;
    const int n = g.size();
    const auto xi = ring_harmonics(map, g, -N, N, [](complexd G) {
        return complexd(std::norm(G), 0.0);
    });
    std::vector<complexd> f(static_cast<size_t>(n), complexd(0.0));
    for (int m = -N; m <= N; ++m) {
        const auto& xim = xi[static_cast<size_t>(m + N)];
        if (xim.empty()) continue;
        const auto& wm = w.mode(-m).values;
        for (int i = 0; i < n; ++i)
            f[static_cast<size_t>(i)] += xim[static_cast<size_t>(i)] * wm[i];
    }
    return 2.0 * M_PI * integrate_xpow(g, f, 1.0).real();
}

MapFactor map_factor(const ConformalMap& map, const GridPtr& grid, int m_max) {
    if (!grid) throw std::invalid_argument("map_factor: needs a grid");
    check_map_grid(map, *grid, "map_factor");
    const int used = used_terms(map);
    int hi = m_max;
    if (hi < 0) hi = used == 0 ? 0 : used + 1;
    const auto mu =
        ring_harmonics(map, *grid, 0, hi, [](complexd G) { return std::conj(G); });
    MapFactor mf;
    mf.modes.reserve(static_cast<size_t>(hi) + 1);
    for (int m = 0; m <= hi; ++m) {
        RadialFunction rf(grid);
        if (!mu[static_cast<size_t>(m)].empty()) rf.values = mu[static_cast<size_t>(m)];
        mf.modes.push_back(std::move(rf));
    }
    return mf;
}

TrajectoryRecord evolve_stokes_mapped(const ConformalMap& map, const VorticityState& w0,
                                      const FarField& far, double T, int steps,
                                      TransformCache& cache) {
    if (w0.grid != cache.radial_grid())
        throw std::invalid_argument("evolve_stokes_mapped: state grid does not match the cache");
    if (!(T > 0.0) || steps < 1)
        throw std::invalid_argument("evolve_stokes_mapped: needs T > 0 and steps >= 1");
    const Grid& g = *w0.grid;
    check_map_grid(map, g, "evolve_stokes_mapped");
    const Grid& sgrid = *cache.spectral_grid();
    const int N = w0.N;
    const int n = g.size();
    const int ns = sgrid.size();
    const double dt = T / steps;

    const auto eta = ring_harmonics(map, g, -2 * N, 2 * N, [](complexd G) {
        return complexd(1.0 / std::norm(G) - 1.0, 0.0);
    });
    bool active = false;
    for (const auto& em : eta) active = active || !em.empty();

    // Kernel residues and their Laplacians: chi = kappa - Winv W kappa needs
    // Lap kappa from the panel derivatives and Lap Winv[g] = Winv[-lambda^2 g].
    std::vector<RadialFunction> chi, lap_chi;
    chi.reserve(static_cast<size_t>(N) + 1);
    lap_chi.reserve(static_cast<size_t>(N) + 1);
    const RadialFunction zero(w0.grid);
    for (int a = 0; a <= N; ++a) {
        PlanPtr plan = cache.mode_plan(a);
        const RadialFunction kappa = project_moment_free(a, zero, complexd(1.0));
        SpectralFunction kh = plan->forward(kappa);
        const RadialFunction rt = plan->inverse(kh);

        RadialFunction ch(w0.grid);
        for (int i = 0; i < n; ++i) ch.values[i] = kappa.values[i] - rt.values[i];

        const std::vector<complexd> d1 = derivative(g, kappa.values);
        const std::vector<complexd> d2 = derivative(g, d1);
        SpectralFunction kh2(cache.spectral_grid());
        for (int j = 0; j < ns; ++j) {
            const double lam = sgrid.nodes[j];
            kh2.values[j] = lam * lam * kh.values[j];
        }
        const RadialFunction rt2 = plan->inverse(kh2);
        RadialFunction lc(w0.grid);
        for (int i = 0; i < n; ++i) {
            const double r = g.nodes[i];
            const complexd lap_kappa =
                d2[static_cast<size_t>(i)] + d1[static_cast<size_t>(i)] / r -
                static_cast<double>(a) * static_cast<double>(a) / (r * r) * kappa.values[i];
            lc.values[i] = lap_kappa + rt2.values[i];
        }
        chi.push_back(std::move(ch));
        lap_chi.push_back(std::move(lc));
    }

    std::vector<std::vector<complexd>> what(static_cast<size_t>(2 * N + 1));
    std::vector<complexd> cc(static_cast<size_t>(2 * N + 1));
    for (int k = -N; k <= N; ++k) {
        what[static_cast<size_t>(k + N)] = cache.mode_plan(k)->forward(w0.mode(k)).values;
        cc[static_cast<size_t>(k + N)] = radial_moment(k, w0.mode(k));
    }

    std::vector<double> E(static_cast<size_t>(ns)), wc0(static_cast<size_t>(ns)),
        wc1(static_cast<size_t>(ns)), wp(static_cast<size_t>(ns));
    for (int j = 0; j < ns; ++j) {
        const double z = sgrid.nodes[j] * sgrid.nodes[j] * dt;
        double p1, p2;
        phi12(z, p1, p2);
        E[static_cast<size_t>(j)] = std::exp(-z);
        wp[static_cast<size_t>(j)] = dt * p1;
        wc0[static_cast<size_t>(j)] = dt * (p1 - p2);
        wc1[static_cast<size_t>(j)] = dt * p2;
    }

    // Lap w_k in radial space from one mode's spectrum and moment scalar.
    auto lap_mode = [&](const std::vector<complexd>& wh, complexd ck, int k,
                        double* tl) -> std::vector<complexd> {
        SpectralFunction sf(cache.spectral_grid());
        for (int j = 0; j < ns; ++j) {
            const double lam = sgrid.nodes[j];
            sf.values[j] = -lam * lam * wh[static_cast<size_t>(j)];
        }
        RadialFunction f = cache.mode_plan(k)->inverse(sf, tl);
        const auto& lc = lap_chi[static_cast<size_t>(std::abs(k))].values;
        for (int i = 0; i < n; ++i) f.values[i] += ck * lc[i];
        return std::move(f.values);
    };

    // f_k = sum_m eta_m Lap w_{k-m}: the lagged correction restoring the
    // |(Phi^{-1})'|^{-2} weight on the Laplacian.
    auto correction = [&](const std::vector<std::vector<complexd>>& laps,
                          int k) -> std::vector<complexd> {
        std::vector<complexd> f(static_cast<size_t>(n), complexd(0.0));
        for (int m = -2 * N; m <= 2 * N; ++m) {
            if (k - m < -N || k - m > N) continue;
            const auto& em = eta[static_cast<size_t>(m + 2 * N)];
            if (em.empty()) continue;
            const auto& lp = laps[static_cast<size_t>(k - m + N)];
            for (int i = 0; i < n; ++i)
                f[static_cast<size_t>(i)] += em[static_cast<size_t>(i)] * lp[static_cast<size_t>(i)];
        }
        return f;
    };

    auto reconstruct = [&](double* tl) -> VorticityState {
        VorticityState out(N, w0.grid);
        SpectralFunction sf(cache.spectral_grid());
        for (int k = -N; k <= N; ++k) {
            sf.values = what[static_cast<size_t>(k + N)];
            RadialFunction f = cache.mode_plan(k)->inverse(sf, tl);
            const complexd ck = cc[static_cast<size_t>(k + N)];
            const auto& ch = chi[static_cast<size_t>(std::abs(k))].values;
            for (int i = 0; i < n; ++i) f.values[i] += ck * ch[i];
            out.mode(k) = std::move(f);
        }
        return out;
    };

    TrajectoryRecord rec;
    rec.times.push_back(0.0);
    rec.states.push_back(w0);

    for (int s = 0; s < steps; ++s) {
        double tail = 0.0;
        if (active) {
            std::vector<std::vector<complexd>> laps(static_cast<size_t>(2 * N + 1));
            std::vector<std::vector<complexd>> fhat1(static_cast<size_t>(2 * N + 1));
            std::vector<complexd> r1(static_cast<size_t>(2 * N + 1));
            for (int k = -N; k <= N; ++k)
                laps[static_cast<size_t>(k + N)] =
                    lap_mode(what[static_cast<size_t>(k + N)], cc[static_cast<size_t>(k + N)], k,
                             nullptr);
            RadialFunction fk(w0.grid);
            for (int k = -N; k <= N; ++k) {
                fk.values = correction(laps, k);
                double tl = 0.0;
                fhat1[static_cast<size_t>(k + N)] = cache.mode_plan(k)->forward(fk, &tl).values;
                r1[static_cast<size_t>(k + N)] =
                    integrate_xpow(g, fk.values, 1.0 - std::abs(k));
                tail = std::max(tail, tl);
            }

            std::vector<std::vector<complexd>> whatp(static_cast<size_t>(2 * N + 1));
            std::vector<complexd> ccp(static_cast<size_t>(2 * N + 1));
            for (int k = -N; k <= N; ++k) {
                const size_t sk = static_cast<size_t>(k + N);
                whatp[sk].resize(static_cast<size_t>(ns));
                for (int j = 0; j < ns; ++j) {
                    const size_t sj = static_cast<size_t>(j);
                    whatp[sk][sj] = E[sj] * what[sk][sj] + wp[sj] * fhat1[sk][sj];
                }
                ccp[sk] = cc[sk] + dt * r1[sk];
            }

            for (int k = -N; k <= N; ++k)
                laps[static_cast<size_t>(k + N)] =
                    lap_mode(whatp[static_cast<size_t>(k + N)], ccp[static_cast<size_t>(k + N)],
                             k, nullptr);
            for (int k = -N; k <= N; ++k) {
                const size_t sk = static_cast<size_t>(k + N);
                fk.values = correction(laps, k);
                double tl = 0.0;
                const std::vector<complexd> fhat2 =
                    cache.mode_plan(k)->forward(fk, &tl).values;
                const complexd r2 = integrate_xpow(g, fk.values, 1.0 - std::abs(k));
                tail = std::max(tail, tl);
                for (int j = 0; j < ns; ++j) {
                    const size_t sj = static_cast<size_t>(j);
                    what[sk][sj] =
                        E[sj] * what[sk][sj] + wc0[sj] * fhat1[sk][sj] + wc1[sj] * fhat2[sj];
                }
                cc[sk] += 0.5 * dt * (r1[sk] + r2);
            }
        } else {
            for (int k = -N; k <= N; ++k) {
                auto& wh = what[static_cast<size_t>(k + N)];
                for (int j = 0; j < ns; ++j) wh[static_cast<size_t>(j)] *= E[static_cast<size_t>(j)];
            }
        }

        VorticityState wcur = reconstruct(&tail);
        MappedSources src = transform_sources(map, wcur);
        const std::vector<complexd> res = residuals_from_sources(src, far);
        StepDiagnostics diag;
        for (const complexd& rr : res)
            diag.manifold_residual_max = std::max(diag.manifold_residual_max, std::abs(rr));
        VelocityState vel = velocity_from_sources(src, far, nullptr, nullptr);
        diag.boundary_velocity = boundary_velocity_norm(vel, N);
        diag.tail_fraction = tail;

        rec.times.push_back((s + 1) * dt);
        rec.states.push_back(std::move(wcur));
        rec.diagnostics.push_back(diag);
    }
    return rec;
}

} // namespace vortexbc
