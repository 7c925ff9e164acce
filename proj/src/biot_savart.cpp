#include "vortexbc/biot_savart.hpp"

#include <cmath>
#include <stdexcept>

namespace vortexbc {

namespace {

void check_mode(int k, int N, const char* who) {
    if (k < -N || k > N)
        throw std::invalid_argument(std::string(who) + ": mode out of range");
}

} // namespace

complexd FarField::r_coeff(int k) const {
    if (k != 1 && k != -1) return complexd(0.0);
    return 0.5 * complexd(vx, -static_cast<double>(k) * vy);
}

complexd FarField::phi_coeff(int k) const {
    if (k != 1 && k != -1) return complexd(0.0);
    return 0.5 * complexd(vy, static_cast<double>(k) * vx);
}

FarField far_field_coeffs(double vx, double vy) { return FarField{vx, vy}; }

VorticityState::VorticityState(int N_, GridPtr grid_) : N(N_), grid(std::move(grid_)) {
    if (N < 0 || !grid) throw std::invalid_argument("VorticityState: bad N or grid");
    modes.assign(2 * N + 1, RadialFunction(grid));
}

RadialFunction& VorticityState::mode(int k) {
    check_mode(k, N, "VorticityState::mode");
    return modes[static_cast<size_t>(k + N)];
}

const RadialFunction& VorticityState::mode(int k) const {
    check_mode(k, N, "VorticityState::mode");
    return modes[static_cast<size_t>(k + N)];
}

void VorticityState::mirror_negative_modes() {
    for (int k = 1; k <= N; ++k) {
        const auto& src = mode(k).values;
        auto& dst = mode(-k).values;
        for (size_t i = 0; i < src.size(); ++i) dst[i] = std::conj(src[i]);
    }
}

VelocityState::VelocityState(int N_, GridPtr grid_) : N(N_), grid(std::move(grid_)) {
    if (N < 0 || !grid) throw std::invalid_argument("VelocityState: bad N or grid");
    vr.assign(2 * N + 1, RadialFunction(grid));
    vphi.assign(2 * N + 1, RadialFunction(grid));
}

RadialFunction& VelocityState::vr_mode(int k) {
    check_mode(k, N, "VelocityState::vr_mode");
    return vr[static_cast<size_t>(k + N)];
}

const RadialFunction& VelocityState::vr_mode(int k) const {
    check_mode(k, N, "VelocityState::vr_mode");
    return vr[static_cast<size_t>(k + N)];
}

RadialFunction& VelocityState::vphi_mode(int k) {
    check_mode(k, N, "VelocityState::vphi_mode");
    return vphi[static_cast<size_t>(k + N)];
}

const RadialFunction& VelocityState::vphi_mode(int k) const {
    check_mode(k, N, "VelocityState::vphi_mode");
    return vphi[static_cast<size_t>(k + N)];
}

VelocityState reconstruct_velocity(const VorticityState& w, const FarField& far,
                                   BiotSavartReport* report) {
    const Grid& g = *w.grid;
    const int n = g.size();
    VelocityState v(w.N, w.grid);

    double tail_max = 0.0;
    double l1_tail = 0.0;

#pragma omp parallel for schedule(dynamic) reduction(max : tail_max, l1_tail)
    for (int idx = 0; idx < 2 * w.N + 1; ++idx) {
        const int k = idx - w.N;
        const int a = std::abs(k);
        const RadialFunction& wk = w.modes[static_cast<size_t>(idx)];

        std::vector<complexd> fin(n), fout(n);
        for (int i = 0; i < n; ++i) {
            double r = g.nodes[i];
            fin[i] = std::pow(r, a + 1) * wk.values[i];
            fout[i] = std::pow(r, 1 - a) * wk.values[i];
        }
        std::vector<complexd> cin = cumulative_from_start(g, fin);
        std::vector<complexd> cout = cumulative_to_end(g, fout);

        const complexd vr_inf = far.r_coeff(k);
        const complexd vphi_inf = far.phi_coeff(k);
        const complexd half_i_sgn =
            (k > 0) ? complexd(0.0, 0.5) : (k < 0 ? complexd(0.0, -0.5) : complexd(0.0));

        auto& vrk = v.vr[static_cast<size_t>(idx)].values;
        auto& vpk = v.vphi[static_cast<size_t>(idx)].values;
        for (int i = 0; i < n; ++i) {
            double r = g.nodes[i];
            complexd in_part = std::pow(r, -a - 1) * cin[i];
            complexd out_part = std::pow(r, a - 1) * cout[i];
            vrk[i] = half_i_sgn * (in_part + out_part) + vr_inf;
            vpk[i] = 0.5 * (in_part - out_part) + vphi_inf;
        }

        tail_max = std::max(tail_max, tail_fraction(g, wk.values, 1.0 - a));
        if (a <= 1) l1_tail = std::max(l1_tail, tail_fraction(g, wk.values, 1.0));
    }

    if (report) {
        report->tail_fraction = tail_max;
        report->l1_tail = l1_tail;
        report->circulation = circulation(w);
    }
    return v;
}

complexd moment(int k, const VorticityState& w) {
    check_mode(k, w.N, "moment");
    return integrate_xpow(*w.grid, w.mode(k).values, 1.0 - std::abs(k));
}

std::vector<complexd> manifold_residual(const VorticityState& w, const FarField& far) {
    const double r0 = w.grid->a;
    std::vector<complexd> res(static_cast<size_t>(w.N) + 1);
    for (int k = 0; k <= w.N; ++k)
        res[static_cast<size_t>(k)] =
            moment(k, w) - 2.0 * far.phi_coeff(k) * std::pow(r0, 1 - std::abs(k));
    return res;
}

double circulation(const VorticityState& w) {
    return 2.0 * M_PI * integrate_xpow(*w.grid, w.mode(0).values, 1.0).real();
}

double boundary_velocity_norm(const VelocityState& v, int K) {
    if (K < 0 || K > v.N)
        throw std::invalid_argument("boundary_velocity_norm: cutoff out of range");
    if (!v.grid->boundary_node)
        throw std::invalid_argument("boundary_velocity_norm: grid lacks the r0 node");
    double sum = 0.0;
    for (int k = -K; k <= K; ++k) {
        double s = std::norm(v.vr_mode(k).values[0]) + std::norm(v.vphi_mode(k).values[0]);
        sum += (1.0 + std::abs(k)) * s;
    }
    return std::sqrt(sum);
}

} // namespace vortexbc
