#pragma once
/**
 * @brief Kirchhoff transform K(m) = int_0^m kappa, its inverse, and a bi-Lipschitz audit.
 *
 * For non-constant kappa the integral is tabulated at breakpoints 0, 1, 2, 4, ..., 2^62 with
 * adaptive composite 5-point Gauss-Legendre quadrature; a query integrates only from the
 * nearest breakpoint below. The table is filled lazily up to the largest breakpoint queried
 * and shared between copies. Constant kappa uses the exact linear form.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/model.hpp"

namespace phaseseg {

namespace detail {

inline double gauss5(const ScalarFn& f, double a, double b) {
    static constexpr std::array<double, 5> x{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                             0.9061798459386640};
    static constexpr std::array<double, 5> w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                             0.2369268850561891, 0.2369268850561891};
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += w[i] * f(c + h * x[i]);
    return s * h;
}

inline double adaptive_gauss5(const ScalarFn& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = gauss5(f, a, m), right = gauss5(f, m, b);
    if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
    return adaptive_gauss5(f, a, m, left, 0.5 * tol, depth - 1) + adaptive_gauss5(f, m, b, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

class KirchhoffTransform {
public:
    static constexpr int kMaxExponent = 62;
    static constexpr int kMaxDepth = 16;

    /// panels: uniform sub-panels per breakpoint interval before adaptive refinement.
    explicit KirchhoffTransform(Mobility mobility, int panels = 8) : mobility_(std::move(mobility)), panels_(panels) {
        if (panels_ < 1) throw InvalidParameter("KirchhoffTransform: panels >= 1 required");
        if (mobility_.constant) return;
        breaks_.push_back(0.0);
        double b = 1.0;
        for (int e = 0; e <= kMaxExponent; ++e, b *= 2.0) breaks_.push_back(b);
        table_ = std::make_shared<Table>();
        table_->values.push_back(0.0);
    }

    const Mobility& mobility() const { return mobility_; }
    int panels() const { return panels_; }

    double operator()(double m) const { return K(m); }

    double K(double m) const {
        if (!(m >= 0.0)) {
            std::ostringstream os;
            os << "K: argument must be >= 0 (got " << m << ")";
            throw DomainError(os.str());
        }
        if (mobility_.constant) return mobility_.kappa_min * m;
        const std::size_t j = bracket_of(m);
        return value_at(j) + integrate(breaks_[j], m);
    }

    /// m >= 0 with K(m) = y, by Newton (K' = kappa) inside the breakpoint bracket.
    double inverse(double y) const {
        if (!(y >= 0.0)) throw DomainError("K_inverse: argument must be >= 0");
        if (mobility_.constant) return y / mobility_.kappa_min;
        std::size_t j = 0;
        while (j + 1 < breaks_.size() && value_at(j + 1) <= y) ++j;
        const double base = value_at(j);
        double lo = breaks_[j];
        double hi = j + 1 < breaks_.size() ? breaks_[j + 1] : lo + (y - base) / mobility_.kappa_min;
        const double tol = 1e-12 * std::max(1.0, y);
        double m = lo + (y - base) / mobility_(lo);
        if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double f = K(m) - y;
            if (std::abs(f) <= tol) return m;
            if (f > 0.0)
                hi = m;
            else
                lo = m;
            if (std::nextafter(lo, hi) >= hi) return m;
            double next = m - f / mobility_(m);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            m = next;
        }
        return m;
    }

private:
    struct Table {
        std::mutex lock;
        std::vector<double> values;
    };

    double value_at(std::size_t j) const {
        std::lock_guard<std::mutex> guard(table_->lock);
        auto& v = table_->values;
        while (v.size() <= j) v.push_back(v.back() + integrate(breaks_[v.size() - 1], breaks_[v.size()]));
        return v[j];
    }

    std::size_t bracket_of(double m) const {
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), m);
        return static_cast<std::size_t>(it - breaks_.begin()) - 1;
    }

    double integrate(double a, double b) const {
        if (b <= a) return 0.0;
        const double width = (b - a) / panels_;
        double s = 0.0;
        for (int k = 0; k < panels_; ++k) {
            const double pa = a + width * k;
            const double pb = k + 1 == panels_ ? b : a + width * (k + 1);
            const double whole = detail::gauss5(mobility_.kappa, pa, pb);
            const double tol = 1e-13 * std::max(1.0, std::abs(whole));
            s += detail::adaptive_gauss5(mobility_.kappa, pa, pb, whole, tol, kMaxDepth);
        }
        return s;
    }

    Mobility mobility_;
    int panels_;
    std::vector<double> breaks_;
    std::shared_ptr<Table> table_;
};

struct BilipschitzReport {
    double lower_margin = kInf;      // min |dK| - kmin |dm|
    double upper_margin = kInf;      // min kmax |dm| - |dK|
    double monotone_margin = kInf;   // min dm dK - kmin dm^2
    std::size_t pairs = 0;
    bool strictly_increasing = true;

    bool passed(double tol = 1e-9) const {
        return strictly_increasing && lower_margin >= -tol && upper_margin >= -tol && monotone_margin >= -tol;
    }
};

/// Audits the bi-Lipschitz and strong-monotonicity bounds of K on all pairs of `samples`
/// uniformly spaced points in [0, m_max].
inline BilipschitzReport check_bilipschitz(const KirchhoffTransform& t, std::size_t samples, double m_max = 10.0) {
    if (samples < 2) throw InvalidParameter("check_bilipschitz: samples >= 2 required");
    std::vector<double> m(samples), k(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        m[i] = m_max * static_cast<double>(i) / static_cast<double>(samples - 1);
        k[i] = t.K(m[i]);
    }
    const double kmin = t.mobility().kappa_min, kmax = t.mobility().kappa_max;
    BilipschitzReport rep;
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t j = i + 1; j < samples; ++j) {
            const double dm = m[j] - m[i], dk = k[j] - k[i];
            rep.lower_margin = std::min(rep.lower_margin, std::abs(dk) - kmin * std::abs(dm));
            rep.upper_margin = std::min(rep.upper_margin, kmax * std::abs(dm) - std::abs(dk));
            rep.monotone_margin = std::min(rep.monotone_margin, dm * dk - kmin * dm * dm);
            if (!(dk > 0.0)) rep.strictly_increasing = false;
            ++rep.pairs;
        }
    return rep;
}

/// Mobility recovered from K by a centered difference quotient, K'(m) ~ kappa(m).
inline Mobility reconstructed_mobility(const KirchhoffTransform& t) {
    Mobility m;
    m.kappa = [t](double x) {
        const double h = std::ldexp(1.0, -10) * std::max(1.0, x);
        const double a = std::max(0.0, x - h);
        return (t.K(x + h) - t.K(a)) / (x + h - a);
    };
    m.kappa_min = t.mobility().kappa_min;
    m.kappa_max = t.mobility().kappa_max;
    m.constant = false;
    return m;
}

}  // namespace phaseseg
