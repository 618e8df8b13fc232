#pragma once

// Brute-force oracles, written from the combination rule's definition and
// kept independent of the library implementation: plain long double
// summation, no max-shifting, no shared helpers. The library must agree with
// these within 1e-9 on small instances.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using vec = std::vector<double>;

inline long double logsumexp_direct(const vec & v) {
    long double sum = 0.0L;
    for (double x : v) {
        sum += expl(static_cast<long double>(x));
    }
    return logl(sum);
}

inline vec normalize(const vec & v) {
    const long double z = logsumexp_direct(v);
    vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<double>(static_cast<long double>(v[i]) - z);
    }
    return out;
}

inline double entropy(const vec & v) {
    long double h = 0.0L;
    for (double x : v) {
        const long double p = expl(static_cast<long double>(x));
        if (p > 0.0L) {
            h -= p * static_cast<long double>(x);
        }
    }
    return static_cast<double>(h);
}

inline vec average_pool(const std::vector<vec> & windows) {
    vec out(windows[0].size(), 0.0);
    for (size_t j = 0; j < out.size(); ++j) {
        long double s = 0.0L;
        for (const auto & w : windows) {
            s += static_cast<long double>(w[j]);
        }
        out[j] = static_cast<double>(s / static_cast<long double>(windows.size()));
    }
    return out;
}

inline size_t entropy_argmin(const std::vector<vec> & windows) {
    size_t best = 0;
    double best_h = entropy(windows[0]);
    for (size_t k = 1; k < windows.size(); ++k) {
        const double h = entropy(windows[k]);
        if (h < best_h) {
            best_h = h;
            best = k;
        }
    }
    return best;
}

// (beta+1) * pooled - beta * context_free, renormalized. `pooled` is either
// the average or a selected window.
inline vec combine(const vec & pooled, const vec & context_free, double beta) {
    vec raw(pooled.size());
    for (size_t j = 0; j < raw.size(); ++j) {
        raw[j] = static_cast<double>((static_cast<long double>(beta) + 1.0L) * pooled[j] -
                                     static_cast<long double>(beta) * context_free[j]);
    }
    return normalize(raw);
}

// The n-window product form: sum_k log p(T|S_k) - (n-1) log p(T), renormalized.
inline vec combine_product_form(const std::vector<vec> & windows, const vec & context_free) {
    const long double n1 = static_cast<long double>(windows.size()) - 1.0L;
    vec raw(context_free.size());
    for (size_t j = 0; j < raw.size(); ++j) {
        long double s = 0.0L;
        for (const auto & w : windows) {
            s += static_cast<long double>(w[j]);
        }
        raw[j] = static_cast<double>(s - n1 * static_cast<long double>(context_free[j]));
    }
    return normalize(raw);
}

// Student-t two-sided p-value by Simpson quadrature over the density, an
// independent route to the closed-form CDF.
inline double student_t_two_sided_p(double t, double dof) {
    const double abs_t = std::fabs(t);
    const long double v = static_cast<long double>(dof);
    const long double ln_coeff = lgammal((v + 1.0L) / 2.0L) - lgammal(v / 2.0L) -
                                 0.5L * logl(v * 3.14159265358979323846264338327950288L);
    auto pdf = [&](long double x) {
        return expl(ln_coeff - (v + 1.0L) / 2.0L * log1pl(x * x / v));
    };
    // integral of the pdf over [0, |t|] with composite Simpson
    const int steps = 20000;  // even
    const long double h = static_cast<long double>(abs_t) / steps;
    long double sum = pdf(0.0L) + pdf(static_cast<long double>(abs_t));
    for (int i = 1; i < steps; ++i) {
        sum += pdf(h * i) * ((i % 2 == 1) ? 4.0L : 2.0L);
    }
    const long double integral = sum * h / 3.0L;
    long double p = 1.0L - 2.0L * integral;
    if (p < 0.0L) {
        p = 0.0L;
    }
    return static_cast<double>(p);
}

}  // namespace oracle
