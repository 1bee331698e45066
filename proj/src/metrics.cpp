#include "ctrkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctrkit {

double auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw DimensionError("auc: size mismatch");
    const std::size_t n = labels.size();
    std::size_t pos = 0;
    for (auto y : labels) pos += y;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw MetricError("auc: needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie blocks, then the Mann-Whitney identity
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double logloss(std::span<const std::uint8_t> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw DimensionError("logloss: size mismatch");
    if (labels.empty()) throw MetricError("logloss: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::min(1.0 - 1e-7, std::max(1e-7, scores[i]));
        s += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return s / static_cast<double>(labels.size());
}

namespace {

// Lentz's continued fraction for the incomplete beta function.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double sample_mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_var(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw MetricError("welch_t: both samples need size >= 2");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = sample_mean(a), mb = sample_mean(b);
    const double va = sample_var(a, ma) / na, vb = sample_var(b, mb) / nb;
    WelchResult r;
    const double denom2 = va + vb;
    if (denom2 <= 0.0) {
        // degenerate: both samples constant
        r.dof = na + nb - 2.0;
        if (ma == mb) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = ma > mb ? 1e300 : -1e300;
            r.p = 0.0;
        }
        return r;
    }
    r.t = (ma - mb) / std::sqrt(denom2);
    r.dof = denom2 * denom2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    const double x = r.dof / (r.dof + r.t * r.t);
    r.p = incomplete_beta(r.dof / 2.0, 0.5, x);
    return r;
}

std::vector<double> feature_correlation(std::span<const double> rows, std::size_t n, std::size_t m) {
    if (rows.size() != n * m) throw DimensionError("feature_correlation: size mismatch");
    if (n < 2) throw MetricError("feature_correlation: needs at least 2 rows");
    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) mean[j] += rows[i * m + j];
    for (std::size_t j = 0; j < m; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double d = rows[i * m + j] - mean[j];
            sd[j] += d * d;
        }
    std::vector<bool> flat(m);
    for (std::size_t j = 0; j < m; ++j) {
        sd[j] = std::sqrt(sd[j]);
        flat[j] = sd[j] == 0.0;
    }

    std::vector<double> corr(m * m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (flat[j]) continue;
        corr[j * m + j] = 1.0;
        for (std::size_t k = j + 1; k < m; ++k) {
            if (flat[k]) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += (rows[i * m + j] - mean[j]) * (rows[i * m + k] - mean[k]);
            const double c = s / (sd[j] * sd[k]);
            corr[j * m + k] = c;
            corr[k * m + j] = c;
        }
    }
    return corr;
}

}  // namespace ctrkit
