#include "vortexbc/weber_orr.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fixtures.hpp"
#include "vortexbc/bessel.hpp"

using namespace vortexbc;
using vortexbc_test::gaussian_mode;
using vortexbc_test::rel_l2;

namespace {

vortexbc_test::SharedFixture& fixture() { return vortexbc_test::shared_fixture(); }

} // namespace

TEST_CASE("forward transform is a contraction in the weighted norms") {
    auto& fx = fixture();
    // 20 deterministic bumps spread over centers and widths, orders 1..3.
    int count = 0;
    for (int k = 1; k <= 3; ++k) {
        PlanPtr plan = fx.cache.mode_plan(k);
        for (int c = 0; c < 7 && count < 20; ++c, ++count) {
            double center = 2.0 + 0.9 * c;
            double width = 0.55 + 0.1 * (c % 3);
            RadialFunction f = gaussian_mode(fx.rg, center, width,
                                             complexd(1.0, 0.3 * c - 1.0));
            SpectralFunction fh = plan->forward(f);
            CAPTURE(k);
            CAPTURE(center);
            CHECK(weighted_l2(*fx.sg, fh.values) <=
                  weighted_l2(*fx.rg, f.values) * (1.0 + 1e-10));
        }
    }
    CHECK(count == 20);
}

TEST_CASE("round trip reproduces moment-free data") {
    auto& fx = fixture();
    for (int k = 1; k <= 3; ++k) {
        // The bump must be genuinely interior: boundary activity turns the
        // spectral decay algebraic and the lambda_max truncation then bites.
        PlanPtr plan = fx.cache.mode_plan(k);
        RadialFunction f =
            project_moment_free(k, gaussian_mode(fx.rg, 4.0, 0.65), complexd(0.0));
        RadialFunction back = plan->inverse(plan->forward(f));
        CAPTURE(k);
        CHECK(rel_l2(*fx.rg, back.values, f.values) <= 1e-6);
    }
}

TEST_CASE("round trip strips the kernel component of arbitrary data") {
    auto& fx = fixture();
    const int k = 2;
    PlanPtr plan = fx.cache.mode_plan(k);
    RadialFunction f = gaussian_mode(fx.rg, 4.0, 0.7);
    complexd m0 = radial_moment(k, f);
    REQUIRE(std::abs(m0) > 0.05); // data deliberately not moment-free

    // The transform annihilates r^{-k}, so the round trip returns the
    // moment-free part; the leftover moment is set by the r_max truncation
    // of the kernel function, not by the quadrature.
    RadialFunction back = plan->inverse(plan->forward(f));
    CHECK(std::abs(radial_moment(k, back)) <= 0.01 * std::abs(m0));
}

TEST_CASE("moment projection hits its target") {
    auto& fx = fixture();
    for (int k : {0, 1, 2, 5}) {
        RadialFunction f = gaussian_mode(fx.rg, 4.0, 1.0, complexd(0.7, -0.2));
        complexd target(0.25, 0.125);
        RadialFunction g = project_moment_free(k, f, target);
        CAPTURE(k);
        CHECK(std::abs(radial_moment(k, g) - target) <= 1e-12);
        RadialFunction z = project_moment_free(k, f, complexd(0.0));
        CHECK(std::abs(radial_moment(k, z)) <= 1e-12);
    }
}

TEST_CASE("transform kernel boundary trace equals the forcing kernel") {
    auto& fx = fixture();
    for (int k = 0; k <= 4; ++k) {
        PlanPtr plan = fx.cache.mode_plan(k);
        const auto& rho = plan->boundary_trace();
        for (int j = 0; j < fx.sg->size(); j += 97) {
            CAPTURE(k);
            CAPTURE(fx.sg->nodes[j]);
            double want = forcing_kernel(k, fx.sg->nodes[j], fx.rg->a);
            CHECK(rho[j] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("differentiation rules hold on smooth moment-free data") {
    auto& fx = fixture();
    for (int k = 1; k <= 4; ++k) {
        RadialFunction f =
            project_moment_free(k, gaussian_mode(fx.rg, 4.0, 0.65), complexd(0.0));
        DerivativeRuleReport rep = check_derivative_rules(k, f, fx.cache);
        CAPTURE(k);
        CHECK(rep.dr_residual <= 1e-6);
        CHECK(rep.over_r_residual <= 1e-6);
        CHECK(rep.forward_residual <= 1e-6);
    }
    RadialFunction f = gaussian_mode(fx.rg, 3.5, 0.9);
    CHECK_THROWS_AS(check_derivative_rules(0, f, fx.cache), std::invalid_argument);
}

TEST_CASE("forward transform reports undecayed tails") {
    auto& fx = fixture();
    PlanPtr plan = fx.cache.mode_plan(1);

    double tail = 1.0;
    plan->forward(gaussian_mode(fx.rg, 3.0, 0.8), &tail);
    CHECK(tail <= 1e-8);

    RadialFunction slow(fx.rg);
    for (int i = 0; i < fx.rg->size(); ++i) slow.values[i] = 1.0 / fx.rg->nodes[i];
    plan->forward(slow, &tail);
    CHECK(tail > 1e-8);
}

TEST_CASE("transform rejects mismatched grids") {
    auto& fx = fixture();
    PlanPtr plan = fx.cache.mode_plan(1);
    GridPtr other = Grid::radial(1.0, 24.0, 0.5);
    RadialFunction f(other);
    CHECK_THROWS_AS(plan->forward(f), std::invalid_argument);
}
