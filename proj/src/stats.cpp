#include "nbce/stats.hpp"

#include <cmath>
#include <limits>

namespace nbce {

double mean(const std::vector<double> & xs) {
    if (xs.empty()) {
        throw degenerate_samples_error("mean of an empty sample");
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    return sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double> & xs) {
    if (xs.size() < 2) {
        throw degenerate_samples_error("sample std needs at least 2 points");
    }
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Continued fraction for the incomplete beta function (Lentz's method).
static double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) {
        d = fpmin;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) {
            c = fpmin;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) {
            c = fpmin;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) {
            break;
        }
    }
    return h;
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (dof <= 0.0) {
        throw degenerate_samples_error("degrees of freedom must be positive");
    }
    if (std::isinf(t)) {
        return t > 0 ? 1.0 : 0.0;
    }
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

SignificanceResult welch_t_test(const std::vector<double> & a, const std::vector<double> & b) {
    if (a.size() < 2 || b.size() < 2) {
        throw degenerate_samples_error("each sample needs at least 2 points");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean(a);
    const double mb = mean(b);
    const double sa = sample_std(a);
    const double sb = sample_std(b);
    const double va = sa * sa / na;
    const double vb = sb * sb / nb;
    if (va + vb == 0.0) {
        throw degenerate_samples_error("both samples have zero variance");
    }

    SignificanceResult res;
    res.t_statistic = (ma - mb) / std::sqrt(va + vb);
    const double dof = (va + vb) * (va + vb) /
                       (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    // two-sided p-value: P(|T| > |t|) = I_{v/(v+t^2)}(v/2, 1/2)
    const double t2 = res.t_statistic * res.t_statistic;
    res.p_value = incomplete_beta(dof / 2.0, 0.5, dof / (dof + t2));
    res.p_value = std::min(std::max(res.p_value, 0.0), 1.0);
    res.significant = res.p_value < k_significance_level;
    return res;
}

}  // namespace nbce
