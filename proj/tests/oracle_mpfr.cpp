#include "oracle_mpfr.hpp"

#include <mpfr.h>

#include <cmath>
#include <stdexcept>

namespace vortexbc::testing {

namespace {

constexpr mpfr_prec_t kPrec = 256;

double with_jn(int k, double x, int kind) {
    mpfr_t arg, out;
    mpfr_init2(arg, kPrec);
    mpfr_init2(out, kPrec);
    mpfr_set_d(arg, x, MPFR_RNDN);
    if (kind == 0)
        mpfr_jn(out, k, arg, MPFR_RNDN);
    else
        mpfr_yn(out, k, arg, MPFR_RNDN);
    double v = mpfr_get_d(out, MPFR_RNDN);
    mpfr_clear(arg);
    mpfr_clear(out);
    return v;
}

} // namespace

double oracle_bessel_j(int k, double x) { return with_jn(k, x, 0); }

double oracle_bessel_y(int k, double x) { return with_jn(k, x, 1); }

double oracle_bessel_envelope(int k, double x) {
    mpfr_t arg, j, y;
    mpfr_init2(arg, kPrec);
    mpfr_init2(j, kPrec);
    mpfr_init2(y, kPrec);
    mpfr_set_d(arg, x, MPFR_RNDN);
    mpfr_jn(j, k, arg, MPFR_RNDN);
    mpfr_yn(y, k, arg, MPFR_RNDN);
    mpfr_sqr(j, j, MPFR_RNDN);
    mpfr_sqr(y, y, MPFR_RNDN);
    mpfr_add(j, j, y, MPFR_RNDN);
    mpfr_sqrt(j, j, MPFR_RNDN);
    double v = mpfr_get_d(j, MPFR_RNDN);
    mpfr_clear(arg);
    mpfr_clear(j);
    mpfr_clear(y);
    return v;
}

double oracle_bessel_j_zero(int k, double lo, double hi) {
    double flo = oracle_bessel_j(k, lo);
    double fhi = oracle_bessel_j(k, hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw std::invalid_argument("oracle_bessel_j_zero: bracket does not straddle a zero");
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = oracle_bessel_j(k, mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace vortexbc::testing
