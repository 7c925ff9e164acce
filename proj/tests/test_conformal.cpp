#include "vortexbc/conformal.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "vortexbc/stokes.hpp"

using namespace vortexbc;
using namespace vortexbc_test;

namespace {

ConformalMap joukowski() { return ConformalMap(1.0, {complexd(0.25)}); }

// Joukowski derivative in closed form, independent of the library path.
complexd joukowski_derivative(complexd z) { return 1.0 - 0.25 / (z * z); }

// Mirrored state with gaussian bumps on the listed modes.
VorticityState bump_state(int N, const GridPtr& g, const std::vector<int>& ks,
                          const std::vector<complexd>& amps) {
    VorticityState w(N, g);
    for (size_t q = 0; q < ks.size(); ++q)
        w.mode(ks[q]) = gaussian_mode(g, 4.0 + 0.3 * ks[q], 0.7, amps[q]);
    w.mirror_negative_modes();
    return w;
}

// Physical vorticity field of a mirrored state at one point, from the modes.
complexd field_at(const VorticityState& w, int i, double phi) {
    complexd acc(0.0);
    for (int k = -w.N; k <= w.N; ++k)
        acc += w.mode(k).values[i] * std::polar(1.0, k * phi);
    return acc;
}

// Adjusts the k = 0..N modes (ascending, so earlier rows stay fixed up to
// the conjugate-mode coupling) until every mapped manifold residual is
// below the requested floor.
void sweep_to_mapped_manifold(const ConformalMap& map, VorticityState& w,
                              const FarField& far, double floor) {
    for (int pass = 0; pass < 8; ++pass) {
        std::vector<complexd> res = mapped_manifold_residual(map, w, far);
        double worst = 0.0;
        for (const complexd& r : res) worst = std::max(worst, std::abs(r));
        if (worst <= floor) return;
        for (int k = 0; k <= w.N; ++k) {
            res = mapped_manifold_residual(map, w, far);
            const complexd want =
                radial_moment(k, w.mode(k)) - res[static_cast<size_t>(k)];
            w.mode(k) = project_moment_free(k, w.mode(k), want);
            w.mirror_negative_modes();
        }
    }
}

} // namespace

TEST_CASE("conformal map validates its coefficients") {
    CHECK_NOTHROW(ConformalMap());
    CHECK_NOTHROW(joukowski());
    CHECK(ConformalMap().is_identity());
    CHECK_FALSE(joukowski().is_identity());

    CHECK_THROWS_AS(ConformalMap(0.0), std::invalid_argument);
    CHECK_THROWS_AS(ConformalMap(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(ConformalMap(1.0, {complexd(1.0)}), std::invalid_argument);
    CHECK_THROWS_AS(ConformalMap(1.0, {complexd(0.1, std::nan(""))}), std::invalid_argument);
    CHECK_THROWS_AS(ConformalMap(1.0, {complexd(0.1)}, 0), std::invalid_argument);

    const ConformalMap jm = joukowski();
    REQUIRE(jm.c.size() == 3);
    CHECK(jm.c[0] == complexd(1.0));
    CHECK(jm.c[1] == complexd(0.0));
    CHECK(jm.c[2] == complexd(-0.25));
}

TEST_CASE("inverse map takes the unit circle to the Joukowski ellipse") {
    const ConformalMap jm = joukowski();
    for (int q = 0; q < 16; ++q) {
        const double th = 2.0 * M_PI * q / 16.0;
        const complexd img = eval_inverse_map(jm, std::polar(1.0, th));
        CHECK(std::abs(img.real() - 1.25 * std::cos(th)) <= 1e-14);
        CHECK(std::abs(img.imag() - 0.75 * std::sin(th)) <= 1e-14);
    }

    const ConformalMap id;
    const complexd z(1.7, -0.9);
    CHECK(eval_inverse_map(id, z) == z);
    CHECK(eval_inverse_map_derivative(id, z) == complexd(1.0));

    CHECK_THROWS_AS(eval_inverse_map(jm, complexd(0.5, 0.0)), std::domain_error);
    CHECK_THROWS_AS(eval_inverse_map_derivative(jm, complexd(0.0, 0.9)), std::domain_error);
}

TEST_CASE("inverse map deviation from z respects the coefficient bound") {
    const ConformalMap map(1.0, {complexd(0.2), complexd(0.0, 0.1), complexd(-0.05)});
    for (double ra : {1.0, 1.3, 2.6, 8.0}) {
        for (int q = 0; q < 8; ++q) {
            const complexd z = std::polar(ra, 0.4 + 2.0 * M_PI * q / 8.0);
            double bound = 0.0;
            for (size_t nn = 0; nn < map.b.size(); ++nn)
                bound += std::abs(map.b[nn]) * std::pow(ra, -static_cast<double>(nn + 1));
            CHECK(std::abs(eval_inverse_map(map, z) - z) <= bound * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("inverse map derivative matches a centered difference") {
    const ConformalMap map(1.0, {complexd(0.2, 0.05), complexd(0.0, 0.1), complexd(-0.04)});
    const double h = 1e-5;
    for (double ra : {1.2, 2.0, 5.0}) {
        for (int q = 0; q < 6; ++q) {
            const complexd z = std::polar(ra, 0.3 + 2.0 * M_PI * q / 6.0);
            const complexd fd =
                (eval_inverse_map(map, z + h) - eval_inverse_map(map, z - h)) / (2.0 * h);
            CHECK(std::abs(eval_inverse_map_derivative(map, z) - fd) <= 1e-8);
        }
    }

    const ConformalMap jm = joukowski();
    CHECK(eval_inverse_map_derivative(jm, complexd(1.0)) == complexd(0.75));
    for (double ra : {1.0, 1.8, 4.0})
        for (int q = 0; q < 6; ++q) {
            const complexd z = std::polar(ra, 2.0 * M_PI * q / 6.0 + 0.1);
            CHECK(std::abs(eval_inverse_map_derivative(jm, z) - joukowski_derivative(z)) <=
                  1e-15);
        }
}

TEST_CASE("evaluation truncation reports the ignored series mass") {
    std::vector<complexd> b(12);
    for (size_t nn = 0; nn < b.size(); ++nn)
        b[nn] = complexd(0.02 * std::pow(0.6, static_cast<double>(nn)));
    const ConformalMap map(1.0, b, 5);

    const complexd z(1.9, 0.4);
    const double za = std::abs(z);
    double tail = -1.0;
    const complexd got = eval_inverse_map(map, z, &tail);

    complexd partial = z;
    double want_tail = 0.0;
    for (size_t nn = 0; nn < b.size(); ++nn) {
        const complexd term = b[nn] * std::pow(z, -static_cast<double>(nn + 1));
        if (static_cast<int>(nn) < 5)
            partial += term;
        else
            want_tail += std::abs(b[nn]) * std::pow(za, -static_cast<double>(nn + 1));
    }
    CHECK(std::abs(got - partial) <= 1e-15);
    CHECK(tail == doctest::Approx(want_tail).epsilon(1e-12));
    CHECK(tail > 0.0);
    CHECK(map.series_tail(3.0) < map.series_tail(1.0));
}

TEST_CASE("transformed sources reduce exactly to the modes under the identity map") {
    auto& fx = shared_fixture();
    const VorticityState w =
        bump_state(3, fx.rg, {0, 1, 2, 3},
                   {complexd(0.9), complexd(0.7, 0.2), complexd(0.5, -0.3), complexd(0.3)});
    const MappedSources src = transform_sources(ConformalMap(), w);

    CHECK(src.alias_tail == 0.0);
    CHECK_FALSE(src.alias_warning);
    for (int k = -3; k <= 3; ++k) {
        CAPTURE(k);
        double dq = 0.0, dr = 0.0;
        for (int i = 0; i < fx.rg->size(); ++i) {
            dq = std::max(dq, std::abs(src.q_mode(k).values[i] - w.mode(k).values[i]));
            dr = std::max(dr, std::abs(src.r_mode(k).values[i]));
        }
        CHECK(dq == 0.0);
        CHECK(dr == 0.0);
    }

    const VorticityState zero(2, fx.rg);
    const MappedSources zsrc = transform_sources(joukowski(), zero);
    for (int k = -2; k <= 2; ++k)
        for (int i = 0; i < fx.rg->size(); i += 97) {
            CHECK(zsrc.q_mode(k).values[i] == complexd(0.0));
            CHECK(zsrc.r_mode(k).values[i] == complexd(0.0));
        }
}

TEST_CASE("transformed sources match a dense angular quadrature") {
    auto& fx = shared_fixture();
    const int N = 3;
    const VorticityState w = bump_state(N, fx.rg, {1}, {complexd(0.8, -0.35)});
    const ConformalMap jm = joukowski();
    const MappedSources src = transform_sources(jm, w);

    const int n_ang = 512;
    double worst = 0.0;
    for (int i = 0; i < fx.rg->size(); i += 53) {
        const double r = fx.rg->nodes[i];
        for (int k = -N; k <= N; ++k) {
            complexd acc(0.0);
            for (int j = 0; j < n_ang; ++j) {
                const double phi = 2.0 * M_PI * j / n_ang;
                const complexd G = joukowski_derivative(std::polar(r, phi));
                acc += std::conj(G) * field_at(w, i, phi) * std::polar(1.0, -k * phi);
            }
            acc /= static_cast<double>(n_ang);
            const complexd got = src.q_mode(k).values[i] +
                                 complexd(0.0, 1.0) * src.r_mode(k).values[i];
            worst = std::max(worst, std::abs(got - acc));
        }
    }
    MESSAGE("source harmonics vs angular quadrature: " << worst);
    CHECK(worst <= 1e-8);

    for (int k = 1; k <= N; ++k)
        for (int i = 0; i < fx.rg->size(); i += 211) {
            CAPTURE(k);
            CHECK(src.q_mode(-k).values[i] == std::conj(src.q_mode(k).values[i]));
            CHECK(src.r_mode(-k).values[i] == std::conj(src.r_mode(k).values[i]));
        }
}

TEST_CASE("map factor harmonics follow the closed form of the derivative series") {
    auto& fx = shared_fixture();
    const ConformalMap jm = joukowski();
    const MapFactor mf = map_factor(jm, fx.rg);
    REQUIRE(mf.modes.size() == 3);

    double worst = 0.0;
    for (int i = 0; i < fx.rg->size(); ++i) {
        const double r = fx.rg->nodes[i];
        worst = std::max(worst, std::abs(mf.modes[0].values[i] - complexd(1.0)));
        worst = std::max(worst, std::abs(mf.modes[1].values[i]));
        worst = std::max(worst,
                         std::abs(mf.modes[2].values[i] - std::conj(jm.c[2]) / (r * r)));
    }
    CHECK(worst <= 1e-13);

    const MapFactor idf = map_factor(ConformalMap(), fx.rg);
    REQUIRE(idf.modes.size() == 1);
    for (int i = 0; i < fx.rg->size(); i += 101)
        CHECK(idf.modes[0].values[i] == complexd(1.0));
}

TEST_CASE("a long factor series past the ring resolution raises the alias warning") {
    std::vector<complexd> b(9, complexd(0.0));
    b[8] = complexd(1e-4);
    const ConformalMap map(1.0, b);
    auto& fx = shared_fixture();

    const VorticityState narrow(1, fx.rg);
    const MappedSources src = transform_sources(map, narrow);
    CHECK(src.alias_tail == doctest::Approx(9e-4).epsilon(1e-12));
    CHECK(src.alias_warning);

    const VorticityState wide(6, fx.rg);
    CHECK_FALSE(transform_sources(map, wide).alias_warning);
}

TEST_CASE("mapped velocity reconstruction reduces to the disc formulas") {
    auto& fx = shared_fixture();
    const VorticityState w =
        bump_state(2, fx.rg, {0, 1, 2}, {complexd(0.9), complexd(0.6, 0.2), complexd(0.4)});
    const FarField far = far_field_coeffs(0.3, -0.7);

    BiotSavartReport disc_rep, map_rep;
    const VelocityState disc = reconstruct_velocity(w, far, &disc_rep);
    const VelocityState mapped =
        mapped_reconstruct_velocity(ConformalMap(), w, far, &map_rep);

    for (int k = -2; k <= 2; ++k) {
        CAPTURE(k);
        double d = 0.0;
        for (int i = 0; i < fx.rg->size(); ++i) {
            d = std::max(d, std::abs(disc.vr_mode(k).values[i] - mapped.vr_mode(k).values[i]));
            d = std::max(d, std::abs(disc.vphi_mode(k).values[i] - mapped.vphi_mode(k).values[i]));
        }
        CHECK(d <= 1e-14);
    }
    CHECK(std::abs(map_rep.circulation - disc_rep.circulation) <= 1e-14);
    CHECK(map_rep.tail_fraction == disc_rep.tail_fraction);
}

TEST_CASE("mapped moments agree with the disc moments under the identity map") {
    auto& fx = shared_fixture();
    const VorticityState w =
        bump_state(3, fx.rg, {0, 1, 3}, {complexd(0.8), complexd(0.5, 0.4), complexd(0.3)});
    for (int k = 0; k <= 3; ++k) {
        CAPTURE(k);
        CHECK(std::abs(mapped_moment(ConformalMap(), k, w) - moment(k, w)) <= 1e-14);
    }
    CHECK(std::abs(mapped_circulation(ConformalMap(), w) - circulation(w)) <= 1e-14);

    CHECK_THROWS_AS(mapped_moment(joukowski(), -1, w), std::invalid_argument);
    CHECK_THROWS_AS(mapped_moment(joukowski(), 4, w), std::invalid_argument);

    const VorticityState zero(2, fx.rg);
    CHECK(mapped_moment(joukowski(), 1, zero) == complexd(0.0));
}

TEST_CASE("mapped moments match a dense polar quadrature") {
    auto& fx = shared_fixture();
    const int N = 3;
    const double c0 = 4.3, wd = 0.7;
    const complexd amp(0.6, -0.25);
    VorticityState w(N, fx.rg);
    w.mode(1) = gaussian_mode(fx.rg, c0, wd, amp);
    w.mirror_negative_modes();

    const ConformalMap jm = joukowski();
    const Grid& g = *fx.rg;

    for (int k : {1, 3}) {
        CAPTURE(k);
        // Simpson in s, trapezoid in phi, both independent of the grid.
        const int nr = 4096, na = 256;
        const double h = (g.b - g.a) / nr;
        complexd acc(0.0);
        for (int ir = 0; ir <= nr; ++ir) {
            const double s = g.a + h * ir;
            const complexd ws = amp * std::exp(-std::pow((s - c0) / wd, 2));
            complexd ang(0.0);
            for (int j = 0; j < na; ++j) {
                const double phi = 2.0 * M_PI * j / na;
                const complexd wf = ws * std::polar(1.0, phi) +
                                    std::conj(ws) * std::polar(1.0, -phi);
                ang += std::conj(joukowski_derivative(std::polar(s, phi))) * wf *
                       std::polar(1.0, -k * phi);
            }
            ang /= static_cast<double>(na);
            const double sw = (ir == 0 || ir == nr) ? 1.0 : (ir % 2 == 1 ? 4.0 : 2.0);
            acc += sw * std::pow(s, 1.0 - k) * ang;
        }
        acc *= h / 3.0;

        const complexd got = mapped_moment(jm, k, w);
        MESSAGE("k = " << k << ": mapped moment " << got << ", oracle deviation "
                       << std::abs(got - acc));
        CHECK(std::abs(got - acc) <= 1e-7);
    }
}

TEST_CASE("states on the mapped moment manifold have no boundary velocity") {
    auto& fx = shared_fixture();
    const ConformalMap jm = joukowski();
    const FarField far = far_field_coeffs(0.4, -0.2);
    VorticityState w =
        bump_state(3, fx.rg, {0, 1, 2, 3},
                   {complexd(0.5), complexd(0.45, 0.2), complexd(0.35, -0.1), complexd(0.25)});

    sweep_to_mapped_manifold(jm, w, far, 1e-10);
    const std::vector<complexd> res = mapped_manifold_residual(jm, w, far);
    for (int k = 0; k <= 3; ++k) {
        CAPTURE(k);
        CHECK(std::abs(res[static_cast<size_t>(k)]) <= 1e-10);
    }

    const VelocityState v = mapped_reconstruct_velocity(jm, w, far);
    for (int k = -3; k <= 3; ++k) {
        CAPTURE(k);
        CHECK(std::abs(v.vr_mode(k).values[0]) <= 1e-8);
        CHECK(std::abs(v.vphi_mode(k).values[0]) <= 1e-8);
    }
}

TEST_CASE("mapped velocity approaches the far field as r grows") {
    auto& fx = shared_fixture();
    const FarField far = far_field_coeffs(1.0, 0.3);
    const VorticityState w =
        bump_state(2, fx.rg, {1, 2}, {complexd(2e-5, -1e-5), complexd(1e-5)});
    const VelocityState v = mapped_reconstruct_velocity(joukowski(), w, far);

    const int last = fx.rg->size() - 1;
    const double vmag = std::hypot(far.vx, far.vy);
    double dev = 0.0;
    for (int k = -2; k <= 2; ++k) {
        dev = std::max(dev, std::abs(v.vr_mode(k).values[last] - far.r_coeff(k)));
        dev = std::max(dev, std::abs(v.vphi_mode(k).values[last] - far.phi_coeff(k)));
    }
    MESSAGE("far-field deviation at r = " << fx.rg->nodes[last] << ": " << dev);
    CHECK(dev <= 1e-6 * vmag);
}

TEST_CASE("mapped circulation weighs the modes by the Jacobian harmonics") {
    auto& fx = shared_fixture();
    const Grid& g = *fx.rg;
    VorticityState w(2, fx.rg);
    w.mode(0) = gaussian_mode(fx.rg, 4.0, 0.8, complexd(0.7));
    w.mode(2) = gaussian_mode(fx.rg, 4.6, 0.7, complexd(0.4, 0.3));
    w.mirror_negative_modes();

    const ConformalMap jm = joukowski();
    const complexd c2 = jm.c[2];
    std::vector<complexd> f(static_cast<size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) {
        const double r = g.nodes[i];
        const double r2 = 1.0 / (r * r);
        f[static_cast<size_t>(i)] =
            (1.0 + std::norm(c2) * r2 * r2) * w.mode(0).values[i] +
            c2 * r2 * w.mode(-2).values[i] + std::conj(c2) * r2 * w.mode(2).values[i];
    }
    const double want = 2.0 * M_PI * integrate_xpow(g, f, 1.0).real();
    CHECK(mapped_circulation(jm, w) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("mapped heat evolution under the identity map is the plain semigroup") {
    auto& fx = shared_fixture();
    VorticityState w0(2, fx.rg);
    for (int k = 0; k <= 2; ++k)
        w0.mode(k) = project_moment_free(
            k, gaussian_mode(fx.rg, 4.0 + 0.3 * k, 0.65, complexd(0.8, 0.15 * k)),
            complexd(0.0));
    w0.mirror_negative_modes();

    const double T = 0.5;
    const TrajectoryRecord rec =
        evolve_stokes_mapped(ConformalMap(), w0, FarField{}, T, 10, fx.cache);
    REQUIRE(rec.states.size() == 11);
    REQUIRE(rec.diagnostics.size() == 10);
    CHECK(rec.times.front() == 0.0);
    CHECK(rec.times.back() == doctest::Approx(T));

    const SemigroupResult direct = evolve_stokes(w0, T, fx.cache);
    for (int k = -2; k <= 2; ++k) {
        CAPTURE(k);
        CHECK(rel_l2(*fx.rg, rec.states.back().mode(k).values,
                     direct.state.mode(k).values) <= 1e-12);
    }

    CHECK_THROWS_AS(evolve_stokes_mapped(ConformalMap(), w0, FarField{}, -1.0, 10, fx.cache),
                    std::invalid_argument);
    CHECK_THROWS_AS(evolve_stokes_mapped(ConformalMap(), w0, FarField{}, 1.0, 0, fx.cache),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        evolve_stokes_mapped(ConformalMap(2.0), w0, FarField{}, 1.0, 4, fx.cache),
        std::invalid_argument);
}

TEST_CASE("mapped heat evolution preserves the mapped moments") {
    auto& fx = shared_fixture();
    const ConformalMap jm = joukowski();
    VorticityState w0 =
        bump_state(2, fx.rg, {0, 1, 2},
                   {complexd(0.02), complexd(0.016, 0.006), complexd(0.012, -0.004)});
    sweep_to_mapped_manifold(jm, w0, FarField{}, 1e-12);

    const TrajectoryRecord rec = evolve_stokes_mapped(jm, w0, FarField{}, 1.0, 40, fx.cache);
    double worst = 0.0;
    for (const StepDiagnostics& d : rec.diagnostics)
        worst = std::max(worst, d.manifold_residual_max);
    MESSAGE("worst mapped moment drift over [0, 1]: " << worst);
    CHECK(worst <= 1e-5);

    for (const StepDiagnostics& d : rec.diagnostics) CHECK(d.tail_fraction <= 1e-6);
    CHECK(l2_norm(rec.states.back()) <= l2_norm(w0));
}
