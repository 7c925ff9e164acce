#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace vortexbc {

using complexd = std::complex<double>;

struct Grid;
using GridPtr = std::shared_ptr<const Grid>;

// One-dimensional quadrature grid on [a, b].  The production flavor is
// composite Gauss-Legendre panels; radial grids additionally carry an explicit
// boundary node at a = r0 with zero quadrature weight so boundary traces and
// one-sided stencils have a node to live on.  The uniform flavor (trapezoid
// weights) exists for the finite-difference reference solvers.
struct Grid {
    enum class Kind { GaussPanels, Uniform };

    Kind kind = Kind::GaussPanels;
    double a = 0.0;
    double b = 0.0;
    int ppp = 16;              // points per panel
    bool boundary_node = false;

    std::vector<double> edges;   // panel edges, size panels()+1
    std::vector<double> nodes;   // ascending, length size()
    std::vector<double> weights; // plain dx weights, same length

    // Reference-panel operators on [-1, 1] (GaussPanels only).
    std::vector<double> ref_nodes;
    std::vector<double> ref_bary;    // barycentric weights
    std::vector<double> ref_diff;    // D[i*ppp+j] = l_j'(x_i)
    std::vector<double> ref_cumleft; // C[i*ppp+j] = int_{-1}^{x_i} l_j

    // Radial grid on [r0, r_max]: panels grow geometrically from the boundary
    // until they hit max_panel_width, which should resolve the fastest kernel
    // oscillation (one wavelength 2*pi/lambda_max per 16-point panel).
    static GridPtr radial(double r0, double r_max, double max_panel_width,
                          int points_per_panel = 16);

    // Spectral grid on [lambda_min, lambda_max]: geometric refinement toward
    // lambda_min (the kernels vary like log(lambda) there), width capped at
    // max_panel_width ~ 2*pi/r_max.
    static GridPtr spectral(double lambda_min, double lambda_max,
                            double max_panel_width, int points_per_panel = 16);

    static GridPtr uniform(double a, double b, int n);

    int size() const { return static_cast<int>(nodes.size()); }
    int first_interior() const { return boundary_node ? 1 : 0; }
    int panels() const { return static_cast<int>(edges.size()) - 1; }
    int panel_offset(int p) const { return first_interior() + p * ppp; }
};

// A complex-valued function sampled on the nodes of a radial grid.
struct RadialFunction {
    GridPtr grid;
    std::vector<complexd> values;

    RadialFunction() = default;
    explicit RadialFunction(GridPtr g)
        : grid(std::move(g)), values(grid->size(), complexd(0.0)) {}
};

// Same shape on a spectral (lambda) grid.
struct SpectralFunction {
    GridPtr grid;
    std::vector<complexd> values;

    SpectralFunction() = default;
    explicit SpectralFunction(GridPtr g)
        : grid(std::move(g)), values(grid->size(), complexd(0.0)) {}
};

// Gauss-Legendre rule on [-1, 1] by Newton iteration, n >= 2.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// int_a^b f dx and int_a^b x^p f dx.
complexd integrate(const Grid& g, const std::vector<complexd>& f);
complexd integrate_xpow(const Grid& g, const std::vector<complexd>& f, double p);

// sqrt(int |f|^2 x dx): the L2(r dr) / L2(lambda dlambda) norm.
double weighted_l2(const Grid& g, const std::vector<complexd>& f);

// Share of int x^p |f| dx carried by the last panel; > 1e-8 means the domain
// truncation is eating into the requested accuracy.
double tail_fraction(const Grid& g, const std::vector<complexd>& f, double p);

// Panel-local spectral differentiation.  The boundary-node entry, when
// present, is filled with the one-sided 3-point stencil.
std::vector<complexd> derivative(const Grid& g, const std::vector<complexd>& f);

// One-sided 3-point derivative at nodes[0].
complexd boundary_derivative(const Grid& g, const std::vector<complexd>& f);

// I_i = int_a^{x_i} f  and  I_i = int_{x_i}^b f, exact for the panelwise
// interpolants (GaussPanels) or trapezoid (Uniform).
std::vector<complexd> cumulative_from_start(const Grid& g, const std::vector<complexd>& f);
std::vector<complexd> cumulative_to_end(const Grid& g, const std::vector<complexd>& f);

// Panel-local barycentric interpolation (GaussPanels) or linear (Uniform).
// x clamps to [a, b] within a 1e-12 relative margin, throws beyond it.
complexd interpolate(const Grid& g, const std::vector<complexd>& f, double x);

} // namespace vortexbc
