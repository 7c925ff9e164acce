#include "vortexbc/weber_orr.hpp"

#include <cmath>
#include <stdexcept>

#include "vortexbc/bessel.hpp"

namespace vortexbc {

namespace {

inline double reflect(int k, double v) { return (k < 0 && (k & 1)) ? -v : v; }

} // namespace

WeberOrrPlan::WeberOrrPlan(int k, int l, GridPtr radial, GridPtr spectral)
    : k_(k), l_(l), radial_(std::move(radial)), spectral_(std::move(spectral)) {
    if (!radial_ || !spectral_)
        throw std::invalid_argument("WeberOrrPlan: missing grid");
    if (radial_->kind != Grid::Kind::GaussPanels || spectral_->kind != Grid::Kind::GaussPanels)
        throw std::invalid_argument("WeberOrrPlan: transforms need Gauss-panel grids");
    if (!radial_->boundary_node)
        throw std::invalid_argument("WeberOrrPlan: radial grid must carry the r0 boundary node");

    const int nl = spectral_->size();
    const int nr = radial_->size();
    const double r0 = radial_->a;
    const int ka = std::abs(k_), la = std::abs(l_);
    const int kmax = std::max(ka, la);

    kernel_.resize(static_cast<size_t>(nl) * nr);
    rho_.resize(nl);

#pragma omp parallel for schedule(dynamic, 8)
    for (int j = 0; j < nl; ++j) {
        double lam = spectral_->nodes[j];
        std::vector<double> jb(kmax + 1), yb(kmax + 1);

        bessel_jy_orders(kmax, lam * r0, jb.data(), yb.data());
        double jl0 = reflect(l_, jb[la]);
        double yl0 = reflect(l_, yb[la]);
        double norm = std::hypot(jl0, yl0);
        double cj, cy; // normalized boundary pair
        if (std::isfinite(norm) && norm > 0.0) {
            cj = jl0 / norm;
            cy = yl0 / norm;
        } else {
            cj = 0.0;
            cy = yl0 > 0 ? 1.0 : -1.0;
        }

        double* row = &kernel_[static_cast<size_t>(j) * nr];
        for (int i = 0; i < nr; ++i) {
            bessel_jy_orders(ka, lam * radial_->nodes[i], jb.data(), yb.data());
            double jk = reflect(k_, jb[ka]);
            double yk = reflect(k_, yb[ka]);
            row[i] = jk * cy - yk * cj;
        }
        rho_[j] = row[0]; // radial grids carry nodes[0] = r0
    }
}

SpectralFunction WeberOrrPlan::forward(const RadialFunction& f, double* tail_out) const {
    if (f.grid.get() != radial_.get())
        throw std::invalid_argument("WeberOrrPlan::forward: function lives on a different grid");
    const int nl = spectral_->size();
    const int nr = radial_->size();

    // r-weighted input, computed once.
    std::vector<complexd> rw(nr);
    for (int i = 0; i < nr; ++i)
        rw[i] = radial_->weights[i] * radial_->nodes[i] * f.values[i];

    SpectralFunction out(spectral_);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < nl; ++j) {
        const double* row = &kernel_[static_cast<size_t>(j) * nr];
        complexd s = 0.0;
        for (int i = 0; i < nr; ++i) s += row[i] * rw[i];
        out.values[j] = s;
    }
    if (tail_out) *tail_out = tail_fraction(*radial_, f.values, 1.0);
    return out;
}

RadialFunction WeberOrrPlan::inverse(const SpectralFunction& fh, double* tail_out) const {
    if (fh.grid.get() != spectral_.get())
        throw std::invalid_argument("WeberOrrPlan::inverse: function lives on a different grid");
    const int nl = spectral_->size();
    const int nr = radial_->size();

    std::vector<complexd> lw(nl);
    for (int j = 0; j < nl; ++j)
        lw[j] = spectral_->weights[j] * spectral_->nodes[j] * fh.values[j];

    RadialFunction out(radial_);
    for (int j = 0; j < nl; ++j) {
        const double* row = &kernel_[static_cast<size_t>(j) * nr];
        complexd c = lw[j];
        for (int i = 0; i < nr; ++i) out.values[i] += c * row[i];
    }
    if (tail_out) *tail_out = tail_fraction(*spectral_, fh.values, 1.0);
    return out;
}

TransformCache::TransformCache(GridPtr radial, GridPtr spectral)
    : radial_(std::move(radial)), spectral_(std::move(spectral)) {}

PlanPtr TransformCache::plan(int k, int l) {
    auto key = std::make_pair(k, l);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto p = std::make_shared<WeberOrrPlan>(k, l, radial_, spectral_);
    plans_.emplace(key, p);
    return p;
}

complexd radial_moment(int k, const RadialFunction& f) {
    return integrate_xpow(*f.grid, f.values, 1.0 - std::abs(k));
}

RadialFunction project_moment_free(int k, const RadialFunction& f, complexd target) {
    const Grid& g = *f.grid;
    double r0 = g.a;
    if (g.b - r0 < 3.0 * r0)
        throw std::invalid_argument("project_moment_free: grid too short for the unit-moment bump");

    // A Gaussian window decays superexponentially in both r and lambda; a
    // polynomial window would leave an algebraically decaying tail past
    // lambda_max, and anything touching r0 decays only like lambda^{-5/2}.
    double c = std::min(5.5 * r0, r0 + 0.5 * (g.b - r0));
    double w = std::min(r0, 0.125 * (g.b - r0));
    int ka = std::abs(k);
    RadialFunction phi(f.grid);
    for (int i = 0; i < g.size(); ++i) {
        double r = g.nodes[i];
        double u = (r - c) / w;
        phi.values[i] = std::pow(r, ka - 1.0) * std::exp(-u * u);
    }

    complexd mphi = radial_moment(k, phi);
    if (std::abs(mphi) < 1e-12)
        throw std::invalid_argument("project_moment_free: bump moment degenerate on this grid");

    complexd scale = (target - radial_moment(k, f)) / mphi;
    RadialFunction out = f;
    for (int i = 0; i < g.size(); ++i) out.values[i] += scale * phi.values[i];
    return out;
}

namespace {

double rel_l2_diff(const Grid& g, const std::vector<complexd>& a,
                   const std::vector<complexd>& b) {
    std::vector<complexd> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    double ref = std::max(weighted_l2(g, a), weighted_l2(g, b));
    return ref > 0.0 ? weighted_l2(g, d) / ref : 0.0;
}

} // namespace

DerivativeRuleReport check_derivative_rules(int k, const RadialFunction& f,
                                            TransformCache& cache) {
    if (k < 1) throw std::invalid_argument("check_derivative_rules: needs k >= 1");

    PlanPtr mid = cache.plan(k, k - 1);
    PlanPtr down = cache.plan(k - 1, k - 1);
    PlanPtr up = cache.plan(k + 1, k - 1);
    const Grid& rg = *cache.radial_grid();
    const Grid& sg = *cache.spectral_grid();

    SpectralFunction g = mid->forward(f);
    SpectralFunction lg(cache.spectral_grid());
    for (int j = 0; j < sg.size(); ++j) lg.values[j] = sg.nodes[j] * g.values[j];

    RadialFunction w = mid->inverse(g);
    RadialFunction lo = down->inverse(lg);
    RadialFunction hi = up->inverse(lg);

    DerivativeRuleReport rep{};

    // d/dr W^{-1}_{k,k-1}[g] = 1/2 (W^{-1}_{k-1,k-1} - W^{-1}_{k+1,k-1})[lambda g]
    std::vector<complexd> lhs = derivative(rg, w.values);
    std::vector<complexd> rhs(lhs.size());
    for (size_t i = 0; i < rhs.size(); ++i) rhs[i] = 0.5 * (lo.values[i] - hi.values[i]);
    rep.dr_residual = rel_l2_diff(rg, lhs, rhs);

    // (k/r) W^{-1}_{k,k-1}[g] = 1/2 (W^{-1}_{k+1,k-1} + W^{-1}_{k-1,k-1})[lambda g]
    for (size_t i = 0; i < rhs.size(); ++i) {
        lhs[i] = (static_cast<double>(k) / rg.nodes[i]) * w.values[i];
        rhs[i] = 0.5 * (hi.values[i] + lo.values[i]);
    }
    rep.over_r_residual = rel_l2_diff(rg, lhs, rhs);

    // lambda W_{k,k-1}[f] = W_{k-1,k-1}[k f / r + f']
    std::vector<complexd> df = derivative(rg, f.values);
    RadialFunction combo(f.grid);
    for (int i = 0; i < rg.size(); ++i)
        combo.values[i] = (static_cast<double>(k) / rg.nodes[i]) * f.values[i] + df[i];
    SpectralFunction rhs_s = down->forward(combo);
    std::vector<complexd> lhs_s(sg.size());
    for (int j = 0; j < sg.size(); ++j) lhs_s[j] = sg.nodes[j] * g.values[j];
    rep.forward_residual = rel_l2_diff(sg, lhs_s, rhs_s.values);

    return rep;
}

} // namespace vortexbc
