#pragma once

#include <cmath>

#include "vortexbc/biot_savart.hpp"
#include "vortexbc/weber_orr.hpp"

namespace vortexbc_test {

using namespace vortexbc;

// One shared pair of production-sized grids plus the transform cache; plan
// construction is the expensive part, so every test file reuses these.
struct SharedFixture {
    GridPtr rg = Grid::radial(1.0, 24.0, 2.0 * M_PI / 16.0);
    GridPtr sg = Grid::spectral(1e-3, 16.0, 2.0 * M_PI / 24.0);
    TransformCache cache{rg, sg};
};

inline SharedFixture& shared_fixture() {
    static SharedFixture fx;
    return fx;
}

inline RadialFunction gaussian_mode(const GridPtr& g, double center, double width,
                                    complexd amp = complexd(1.0)) {
    RadialFunction f(g);
    for (int i = 0; i < g->size(); ++i) {
        double u = (g->nodes[i] - center) / width;
        f.values[i] = amp * std::exp(-u * u);
    }
    return f;
}

inline double rel_l2(const Grid& g, const std::vector<complexd>& got,
                     const std::vector<complexd>& want) {
    std::vector<complexd> d(got.size());
    for (size_t i = 0; i < got.size(); ++i) d[i] = got[i] - want[i];
    double ref = weighted_l2(g, want);
    return ref > 0.0 ? weighted_l2(g, d) / ref : weighted_l2(g, d);
}

} // namespace vortexbc_test
