#include "vortexbc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vortexbc {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 2) throw std::invalid_argument("gauss_legendre: need n >= 2");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) {
                // one last polish step keeps the weights symmetric to rounding
                double q0 = 1.0, q1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double q2 = q1;
                    q1 = q0;
                    q0 = ((2.0 * j + 1.0) * z * q1 - j * q2) / (j + 1.0);
                }
                pp = n * (z * q0 - q1) / (z * z - 1.0);
                z -= q0 / pp;
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        double wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
}

namespace {

// Barycentric weights for the reference nodes.
std::vector<double> bary_weights(const std::vector<double>& x) {
    int n = static_cast<int>(x.size());
    std::vector<double> bw(n, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i) bw[i] /= (x[i] - x[j]);
    return bw;
}

double lagrange_eval(const std::vector<double>& x, const std::vector<double>& bw,
                     int basis, double t) {
    // l_basis(t) with a direct product; only used at setup.
    double num = 1.0;
    for (size_t j = 0; j < x.size(); ++j)
        if (static_cast<int>(j) != basis) num *= (t - x[j]);
    return num * bw[basis];
}

void build_reference_ops(Grid& g) {
    std::vector<double> gw;
    gauss_legendre(g.ppp, g.ref_nodes, gw);
    g.ref_bary = bary_weights(g.ref_nodes);

    int n = g.ppp;
    g.ref_diff.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = (g.ref_bary[j] / g.ref_bary[i]) / (g.ref_nodes[i] - g.ref_nodes[j]);
            g.ref_diff[i * n + j] = d;
            rowsum += d;
        }
        g.ref_diff[i * n + i] = -rowsum;
    }

    // C[i][j] = int_{-1}^{x_i} l_j, via an auxiliary GL rule on each [-1, x_i]
    // (l_j has degree n-1, so the n-point auxiliary rule is exact).
    g.ref_cumleft.assign(n * n, 0.0);
    std::vector<double> ax, aw;
    gauss_legendre(n, ax, aw);
    for (int i = 0; i < n; ++i) {
        double half = 0.5 * (g.ref_nodes[i] + 1.0); // half-width of [-1, x_i]
        double mid = 0.5 * (g.ref_nodes[i] - 1.0);  // its center
        for (int q = 0; q < n; ++q) {
            double t = mid + half * ax[q];
            double wq = half * aw[q];
            for (int j = 0; j < n; ++j)
                g.ref_cumleft[i * n + j] += wq * lagrange_eval(g.ref_nodes, g.ref_bary, j, t);
        }
    }
}

GridPtr build_panels(double a, double b, double h0, double hmax, double grow, int ppp,
                     bool boundary) {
    if (!(b > a)) throw std::invalid_argument("grid: needs b > a");
    if (!(hmax > 0.0) || !(h0 > 0.0)) throw std::invalid_argument("grid: panel widths must be positive");

    auto g = std::make_shared<Grid>();
    g->kind = Grid::Kind::GaussPanels;
    g->a = a;
    g->b = b;
    g->ppp = ppp;
    g->boundary_node = boundary;
    build_reference_ops(*g);

    g->edges.push_back(a);
    double h = std::min(h0, hmax);
    while (g->edges.back() < b) {
        double next = g->edges.back() + h;
        if (next > b - 0.25 * h) next = b;
        g->edges.push_back(next);
        h = std::min(h * grow, hmax);
    }

    if (boundary) {
        g->nodes.push_back(a);
        g->weights.push_back(0.0);
    }
    std::vector<double> gx, gw;
    gauss_legendre(ppp, gx, gw);
    for (int p = 0; p < g->panels(); ++p) {
        double lo = g->edges[p], hi = g->edges[p + 1];
        double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (int i = 0; i < ppp; ++i) {
            g->nodes.push_back(mid + half * gx[i]);
            g->weights.push_back(half * gw[i]);
        }
    }
    return g;
}

} // namespace

GridPtr Grid::radial(double r0, double r_max, double max_panel_width, int points_per_panel) {
    if (!(r0 > 0.0)) throw std::invalid_argument("Grid::radial: r0 must be positive");
    if (!(r_max > r0)) throw std::invalid_argument("Grid::radial: r_max must exceed r0");
    double h0 = max_panel_width / 8.0;
    return build_panels(r0, r_max, h0, max_panel_width, 1.3, points_per_panel, true);
}

GridPtr Grid::spectral(double lambda_min, double lambda_max, double max_panel_width,
                       int points_per_panel) {
    if (!(lambda_min > 0.0)) throw std::invalid_argument("Grid::spectral: lambda_min must be positive");
    if (!(lambda_max > lambda_min)) throw std::invalid_argument("Grid::spectral: lambda_max must exceed lambda_min");
    // First panel spans one octave from lambda_min so the log(lambda) kernel
    // variation near zero is resolved.
    double h0 = std::min(lambda_min, max_panel_width);
    return build_panels(lambda_min, lambda_max, h0, max_panel_width, 1.5, points_per_panel, false);
}

GridPtr Grid::uniform(double a, double b, int n) {
    if (n < 3) throw std::invalid_argument("Grid::uniform: need n >= 3");
    if (!(b > a)) throw std::invalid_argument("Grid::uniform: needs b > a");
    auto g = std::make_shared<Grid>();
    g->kind = Kind::Uniform;
    g->a = a;
    g->b = b;
    g->ppp = 0;
    g->boundary_node = false;
    g->edges = {a, b};
    double h = (b - a) / (n - 1);
    g->nodes.resize(n);
    g->weights.assign(n, h);
    for (int i = 0; i < n; ++i) g->nodes[i] = a + h * i;
    g->weights.front() = 0.5 * h;
    g->weights.back() = 0.5 * h;
    return g;
}

namespace {

void check_size(const Grid& g, const std::vector<complexd>& f, const char* fn) {
    if (static_cast<int>(f.size()) != g.size())
        throw std::invalid_argument(std::string(fn) + ": value array does not match grid");
}

} // namespace

complexd integrate(const Grid& g, const std::vector<complexd>& f) {
    check_size(g, f, "integrate");
    complexd s = 0.0;
    for (int i = 0; i < g.size(); ++i) s += g.weights[i] * f[i];
    return s;
}

complexd integrate_xpow(const Grid& g, const std::vector<complexd>& f, double p) {
    check_size(g, f, "integrate_xpow");
    complexd s = 0.0;
    for (int i = 0; i < g.size(); ++i) s += g.weights[i] * std::pow(g.nodes[i], p) * f[i];
    return s;
}

double weighted_l2(const Grid& g, const std::vector<complexd>& f) {
    check_size(g, f, "weighted_l2");
    double s = 0.0;
    for (int i = 0; i < g.size(); ++i) s += g.weights[i] * g.nodes[i] * std::norm(f[i]);
    return std::sqrt(s);
}

double tail_fraction(const Grid& g, const std::vector<complexd>& f, double p) {
    check_size(g, f, "tail_fraction");
    double total = 0.0, tail = 0.0;
    int tail_begin = g.kind == Grid::Kind::GaussPanels ? g.panel_offset(g.panels() - 1)
                                                       : g.size() - std::max(2, g.size() / 16);
    for (int i = 0; i < g.size(); ++i) {
        double c = g.weights[i] * std::pow(g.nodes[i], p) * std::abs(f[i]);
        total += c;
        if (i >= tail_begin) tail += c;
    }
    return total > 0.0 ? tail / total : 0.0;
}

std::vector<complexd> derivative(const Grid& g, const std::vector<complexd>& f) {
    check_size(g, f, "derivative");
    std::vector<complexd> d(f.size());
    if (g.kind == Grid::Kind::Uniform) {
        int n = g.size();
        double h = g.nodes[1] - g.nodes[0];
        for (int i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        d[0] = (-1.5 * f[0] + 2.0 * f[1] - 0.5 * f[2]) / h;
        d[n - 1] = (1.5 * f[n - 1] - 2.0 * f[n - 2] + 0.5 * f[n - 3]) / h;
        return d;
    }
    int n = g.ppp;
    for (int p = 0; p < g.panels(); ++p) {
        double inv_half = 2.0 / (g.edges[p + 1] - g.edges[p]);
        int off = g.panel_offset(p);
        for (int i = 0; i < n; ++i) {
            complexd s = 0.0;
            const double* row = &g.ref_diff[i * n];
            for (int j = 0; j < n; ++j) s += row[j] * f[off + j];
            d[off + i] = s * inv_half;
        }
    }
    if (g.boundary_node) d[0] = boundary_derivative(g, f);
    return d;
}

complexd boundary_derivative(const Grid& g, const std::vector<complexd>& f) {
    check_size(g, f, "boundary_derivative");
    if (g.size() < 3) throw std::invalid_argument("boundary_derivative: needs >= 3 nodes");
    double x0 = g.nodes[0], x1 = g.nodes[1], x2 = g.nodes[2];
    double c0 = (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2));
    double c1 = (x0 - x2) / ((x1 - x0) * (x1 - x2));
    double c2 = (x0 - x1) / ((x2 - x0) * (x2 - x1));
    return c0 * f[0] + c1 * f[1] + c2 * f[2];
}

std::vector<complexd> cumulative_from_start(const Grid& g, const std::vector<complexd>& f) {
    check_size(g, f, "cumulative_from_start");
    std::vector<complexd> out(f.size());
    if (g.kind == Grid::Kind::Uniform) {
        complexd acc = 0.0;
        out[0] = 0.0;
        for (int i = 1; i < g.size(); ++i) {
            acc += 0.5 * (g.nodes[i] - g.nodes[i - 1]) * (f[i] + f[i - 1]);
            out[i] = acc;
        }
        return out;
    }
    int n = g.ppp;
    if (g.boundary_node) out[0] = 0.0;
    complexd acc = 0.0; // integral over full panels before p
    std::vector<double> gw(n);
    {
        std::vector<double> gx;
        gauss_legendre(n, gx, gw);
    }
    for (int p = 0; p < g.panels(); ++p) {
        double half = 0.5 * (g.edges[p + 1] - g.edges[p]);
        int off = g.panel_offset(p);
        complexd panel_total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* row = &g.ref_cumleft[i * n];
            complexd s = 0.0;
            for (int j = 0; j < n; ++j) s += row[j] * f[off + j];
            out[off + i] = acc + half * s;
        }
        for (int j = 0; j < n; ++j) panel_total += half * gw[j] * f[off + j];
        acc += panel_total;
    }
    return out;
}

std::vector<complexd> cumulative_to_end(const Grid& g, const std::vector<complexd>& f) {
    std::vector<complexd> from_start = cumulative_from_start(g, f);
    complexd total = integrate(g, f);
    for (auto& v : from_start) v = total - v;
    return from_start;
}

complexd interpolate(const Grid& g, const std::vector<complexd>& f, double x) {
    check_size(g, f, "interpolate");
    double margin = 1e-12 * (std::abs(g.a) + std::abs(g.b));
    if (x < g.a - margin || x > g.b + margin)
        throw std::invalid_argument("interpolate: point outside grid domain");
    x = std::clamp(x, g.a, g.b);

    if (g.kind == Grid::Kind::Uniform) {
        double h = g.nodes[1] - g.nodes[0];
        int i = std::min(static_cast<int>((x - g.a) / h), g.size() - 2);
        double t = (x - g.nodes[i]) / h;
        return (1.0 - t) * f[i] + t * f[i + 1];
    }

    int p = static_cast<int>(std::upper_bound(g.edges.begin(), g.edges.end(), x) -
                             g.edges.begin()) - 1;
    p = std::clamp(p, 0, g.panels() - 1);
    double lo = g.edges[p], hi = g.edges[p + 1];
    double t = (2.0 * x - lo - hi) / (hi - lo);
    int off = g.panel_offset(p);

    // Barycentric second form; exact hit on a node returns the nodal value.
    complexd num = 0.0;
    double den = 0.0;
    for (int j = 0; j < g.ppp; ++j) {
        double dt = t - g.ref_nodes[j];
        if (std::abs(dt) < 1e-15) return f[off + j];
        double c = g.ref_bary[j] / dt;
        num += c * f[off + j];
        den += c;
    }
    return num / den;
}

} // namespace vortexbc
