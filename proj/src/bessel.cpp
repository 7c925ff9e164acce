#include "vortexbc/bessel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vortexbc {

namespace {

// Minimal double-double arithmetic.  The power series for J_0, J_1, Y_0, Y_1
// cancel down from terms of size ~e^x/(2 pi x); accumulating in double-double
// keeps the result accurate relative to the envelope up to the asymptotic
// switch point.
struct dd {
    double hi;
    double lo;
};

inline dd two_sum(double a, double b) {
    double s = a + b;
    double v = s - a;
    double e = (a - (s - v)) + (b - v);
    return {s, e};
}

inline dd two_prod(double a, double b) {
    double p = a * b;
    double e = std::fma(a, b, -p);
    return {p, e};
}

inline dd dd_add(dd a, dd b) {
    dd s = two_sum(a.hi, b.hi);
    double e = s.lo + a.lo + b.lo;
    dd r = two_sum(s.hi, e);
    return r;
}

inline dd dd_add(dd a, double b) { return dd_add(a, dd{b, 0.0}); }

inline dd dd_mul(dd a, dd b) {
    dd p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return two_sum(p.hi, p.lo);
}

inline dd dd_mul(dd a, double b) {
    dd p = two_prod(a.hi, b);
    p.lo += a.lo * b;
    return two_sum(p.hi, p.lo);
}

inline dd dd_div(dd a, double b) {
    double q1 = a.hi / b;
    dd p = two_prod(q1, b);
    double r = ((a.hi - p.hi) - p.lo) + a.lo;
    double q2 = r / b;
    return two_sum(q1, q2);
}

inline dd dd_neg(dd a) { return {-a.hi, -a.lo}; }

constexpr dd kPi = {3.141592653589793116, 1.2246467991473531772e-16};
constexpr dd kEulerGamma = {0.57721566490153286061, -4.9429352497322979514e-18};
constexpr double kTwoOverPi = 0.63661977236758134308;

// Switch from power series to the Hankel expansion.  At x = 19 the smallest
// asymptotic term is ~e^{-2x} ~ 3e-17 of the envelope and the series still
// carries ~12 safe double-double digits past the cancellation peak.
constexpr double kAsymSwitch = 19.0;

struct JY01 {
    double j0, j1, y0, y1;
};

// Ascending series, x in (0, kAsymSwitch].
JY01 jy01_series(double x) {
    dd q = dd_div(two_prod(x, x), 4.0); // x^2/4, exact product

    // J0 terms t_m = (-1)^m q^m / (m!)^2, J1 terms s_m = (-1)^m q^m / (m!(m+1)!),
    // with the harmonic-number sums for Y0, Y1 accumulated alongside.
    dd t = {1.0, 0.0};
    dd s = {1.0, 0.0};
    dd sum_j0 = t;
    dd sum_j1 = s;
    dd sum_y0 = {0.0, 0.0}; // sum (-1)^{m+1} H_m q^m/(m!)^2
    dd sum_y1 = s;          // sum (-1)^m (H_m + H_{m+1}) q^m/(m!(m+1)!), H_0+H_1 = 1
    dd harm = {0.0, 0.0};

    for (int m = 1; m < 400; ++m) {
        t = dd_neg(dd_div(dd_div(dd_mul(t, q), m), m));
        s = dd_neg(dd_div(dd_div(dd_mul(s, q), m), m + 1));
        harm = dd_add(harm, dd_div(dd{1.0, 0.0}, m));
        dd harm_next = dd_add(harm, dd_div(dd{1.0, 0.0}, m + 1));

        sum_j0 = dd_add(sum_j0, t);
        sum_j1 = dd_add(sum_j1, s);
        sum_y0 = dd_add(sum_y0, dd_neg(dd_mul(t, harm)));
        sum_y1 = dd_add(sum_y1, dd_mul(s, dd_add(harm, harm_next)));

        if (m > x && std::abs(t.hi) < 1e-40 && std::abs(s.hi) < 1e-40) break;
    }

    dd lg = dd_add(dd{std::log(0.5 * x), 0.0}, kEulerGamma); // log(x/2) + gamma

    JY01 out;
    out.j0 = sum_j0.hi + sum_j0.lo;
    dd j1dd = dd_mul(sum_j1, 0.5 * x);
    out.j1 = j1dd.hi + j1dd.lo;

    dd y0dd = dd_mul(dd_add(dd_mul(lg, sum_j0), sum_y0), kTwoOverPi);
    out.y0 = y0dd.hi + y0dd.lo;

    // Y1 = (2/pi) [ (log(x/2)+gamma) J1 - 1/x - (x/4) sum_y1 ]
    dd y1dd = dd_add(dd_mul(lg, j1dd), dd_neg(dd_div(dd{1.0, 0.0}, x)));
    y1dd = dd_add(y1dd, dd_neg(dd_mul(sum_y1, 0.25 * x)));
    y1dd = dd_mul(y1dd, kTwoOverPi);
    out.y1 = y1dd.hi + y1dd.lo;
    return out;
}

// Hankel expansion for order n in {0, 1}, x > kAsymSwitch:
//   J_n = sqrt(2/(pi x)) (P cos chi - Q sin chi),  chi = x - (2n+1) pi/4,
//   Y_n = sqrt(2/(pi x)) (P sin chi + Q cos chi).
void jy_asym(int n, double x, double* jn, double* yn) {
    double mu = 4.0 * n * n;
    double p = 1.0, q = 0.0;
    double term = 1.0;
    double prev = std::numeric_limits<double>::max();
    for (int m = 1; m < 40; ++m) {
        double f = (2 * m - 1);
        term *= (mu - f * f) / (8.0 * x * m);
        double a = std::abs(term);
        if (a >= prev || a < 1e-19) break;
        prev = a;
        switch (m & 3) {
        case 0: p += term; break;
        case 1: q += term; break;
        case 2: p -= term; break;
        default: q -= term; break;
        }
    }

    // chi in double-double; x itself is exact.
    dd c = dd_mul(kPi, 0.25 * (2 * n + 1));
    dd chi = dd_add(dd{x, 0.0}, dd_neg(c));
    double sh = std::sin(chi.hi), ch = std::cos(chi.hi);
    double sc = sh + chi.lo * ch;
    double cc = ch - chi.lo * sh;

    double amp = std::sqrt(kTwoOverPi / x);
    *jn = amp * (p * cc - q * sc);
    *yn = amp * (p * sc + q * cc);
}

JY01 jy01(double x) {
    if (x <= kAsymSwitch) return jy01_series(x);
    JY01 out;
    jy_asym(0, x, &out.j0, &out.y0);
    jy_asym(1, x, &out.j1, &out.y1);
    return out;
}

// Miller backward recurrence for J_0..J_kmax when the upward sweep would be
// unstable (x < kmax).  Normalized against J_0 or J_1 from jy01.
void bessel_j_miller(int kmax, double x, const JY01& base, double* j) {
    int start = std::max(kmax, static_cast<int>(x)) + 16 +
                static_cast<int>(std::ceil(std::sqrt(40.0 * kmax)));
    start += start & 1;

    double bp = 0.0;
    double b = 1e-280;
    for (int m = start; m >= 1; --m) {
        double bm = (2.0 * m / x) * b - bp;
        bp = b;
        b = bm;
        if (m - 1 <= kmax) j[m - 1] = b;
        if (std::abs(b) > 1e280) {
            b *= 1e-280;
            bp *= 1e-280;
            for (int i = m - 1; i <= kmax; ++i) j[i] *= 1e-280;
        }
    }
    // b = candidate J_0, bp = candidate J_1 after the loop.
    double scale = std::abs(base.j0) >= std::abs(base.j1) ? base.j0 / b : base.j1 / bp;
    for (int m = 0; m <= kmax; ++m) j[m] *= scale;
}

void jy_orders_impl(int kmax, double x, double* j, double* y) {
    JY01 base = jy01(x);
    if (kmax >= 0) {
        j[0] = base.j0;
        y[0] = base.y0;
    }
    if (kmax >= 1) {
        j[1] = base.j1;
        y[1] = base.y1;
    }

    // Y_k grows upward for k > x, so the forward sweep is stable everywhere.
    for (int m = 2; m <= kmax; ++m) {
        y[m] = (2.0 * (m - 1) / x) * y[m - 1] - y[m - 2];
        if (!std::isfinite(y[m])) {
            for (int i = m; i <= kmax; ++i) y[i] = y[m];
            break;
        }
    }

    if (kmax >= 2) {
        if (x >= kmax + 2) {
            for (int m = 2; m <= kmax; ++m)
                j[m] = (2.0 * (m - 1) / x) * j[m - 1] - j[m - 2];
        } else {
            bessel_j_miller(kmax, x, base, j);
        }
    }
}

inline double reflect(int k, double v) { return (k < 0 && (k & 1)) ? -v : v; }

void check_x(double x, double low, const char* fn) {
    if (!(x >= low) || !std::isfinite(x))
        throw std::domain_error(std::string(fn) + ": argument " + std::to_string(x) +
                                " outside domain");
}

// J and Y at orders k and l for the same argument, negative orders reflected.
struct Pair2 {
    double jk, yk, jl, yl;
};

Pair2 jy_two_orders(int k, int l, double x) {
    int ka = std::abs(k), la = std::abs(l);
    int kmax = std::max(ka, la);
    double jbuf[72], ybuf[72];
    std::vector<double> jv, yv;
    double *jp = jbuf, *yp = ybuf;
    if (kmax >= 72) {
        jv.resize(kmax + 1);
        yv.resize(kmax + 1);
        jp = jv.data();
        yp = yv.data();
    }
    jy_orders_impl(kmax, x, jp, yp);
    return {reflect(k, jp[ka]), reflect(k, yp[ka]), reflect(l, jp[la]), reflect(l, yp[la])};
}

} // namespace

double bessel_j(int k, double x) {
    check_x(x, 0.0, "bessel_j");
    int ka = std::abs(k);
    if (x == 0.0) return ka == 0 ? 1.0 : 0.0;
    double jbuf[72], ybuf[72];
    std::vector<double> jv, yv;
    double *jp = jbuf, *yp = ybuf;
    if (ka >= 72) {
        jv.resize(ka + 1);
        yv.resize(ka + 1);
        jp = jv.data();
        yp = yv.data();
    }
    jy_orders_impl(ka, x, jp, yp);
    return reflect(k, jp[ka]);
}

double bessel_y(int k, double x) {
    check_x(x, 0.0, "bessel_y");
    if (x == 0.0) throw std::domain_error("bessel_y: argument must be positive");
    int ka = std::abs(k);
    double jbuf[72], ybuf[72];
    std::vector<double> jv, yv;
    double *jp = jbuf, *yp = ybuf;
    if (ka >= 72) {
        jv.resize(ka + 1);
        yv.resize(ka + 1);
        jp = jv.data();
        yp = yv.data();
    }
    jy_orders_impl(ka, x, jp, yp);
    return reflect(k, yp[ka]);
}

void bessel_jy_orders(int kmax, double x, double* j, double* y) {
    check_x(x, 0.0, "bessel_jy_orders");
    if (x == 0.0) throw std::domain_error("bessel_jy_orders: argument must be positive");
    if (kmax < 0) throw std::domain_error("bessel_jy_orders: kmax must be >= 0");
    jy_orders_impl(kmax, x, j, y);
}

double kernel_R(int k, int l, double lambda, double r, double r0) {
    if (!(lambda > 0.0)) throw std::domain_error("kernel_R: lambda must be positive");
    if (!(r0 > 0.0) || !(r >= r0 * (1.0 - 1e-12)))
        throw std::domain_error("kernel_R: requires r >= r0 > 0");

    Pair2 at_r = jy_two_orders(k, l, lambda * r);
    Pair2 at_r0 = jy_two_orders(k, l, lambda * r0);
    double norm = std::hypot(at_r0.jl, at_r0.yl);
    if (!std::isfinite(norm)) {
        // Y_l overflowed: the normalized boundary pair degenerates to (0, sign(Y_l)).
        return at_r.jk * (at_r0.yl > 0 ? 1.0 : -1.0);
    }
    return at_r.jk * (at_r0.yl / norm) - at_r.yk * (at_r0.jl / norm);
}

double kernel_R_dr(int k, int l, double lambda, double r, double r0) {
    if (!(lambda > 0.0)) throw std::domain_error("kernel_R_dr: lambda must be positive");
    if (!(r0 > 0.0) || !(r >= r0 * (1.0 - 1e-12)))
        throw std::domain_error("kernel_R_dr: requires r >= r0 > 0");

    double x = lambda * r;
    Pair2 lower = jy_two_orders(k - 1, l, x);
    Pair2 here = jy_two_orders(k, l, x);
    double djk = lower.jk - (k / x) * here.jk;
    double dyk = lower.yk - (k / x) * here.yk;

    Pair2 at_r0 = jy_two_orders(k, l, lambda * r0);
    double norm = std::hypot(at_r0.jl, at_r0.yl);
    if (!std::isfinite(norm)) return lambda * djk * (at_r0.yl > 0 ? 1.0 : -1.0);
    return lambda * (djk * (at_r0.yl / norm) - dyk * (at_r0.jl / norm));
}

double forcing_kernel(int k, double lambda, double r0) {
    if (!(lambda > 0.0) || !(r0 > 0.0))
        throw std::domain_error("forcing_kernel: requires lambda > 0 and r0 > 0");
    int ka = std::abs(k);
    Pair2 at_r0 = jy_two_orders(ka, ka - 1, lambda * r0);
    double norm = std::hypot(at_r0.jl, at_r0.yl);
    if (!std::isfinite(norm)) return 0.0;
    return 2.0 / (kPi.hi * r0 * lambda * norm);
}

} // namespace vortexbc
