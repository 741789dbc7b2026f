#include "mordred/emd.hpp"

#include <algorithm>
#include <cmath>

#include "mordred/common.hpp"

namespace mordred::emd {

namespace {

struct Extrema {
    std::vector<std::size_t> maxima;
    std::vector<std::size_t> minima;
};

Extrema find_extrema(std::span<const double> h) {
    Extrema e;
    for (std::size_t i = 1; i + 1 < h.size(); ++i) {
        if (h[i] > h[i - 1] && h[i] >= h[i + 1]) e.maxima.push_back(i);
        else if (h[i] < h[i - 1] && h[i] <= h[i + 1]) e.minima.push_back(i);
    }
    return e;
}

std::size_t zero_crossings(std::span<const double> h) {
    std::size_t count = 0;
    for (std::size_t i = 1; i < h.size(); ++i)
        if ((h[i - 1] < 0.0 && h[i] >= 0.0) || (h[i - 1] >= 0.0 && h[i] < 0.0)) ++count;
    return count;
}

// Spline knots: the extrema plus up to two of them mirrored about each end.
std::vector<double> envelope(std::span<const double> h, const std::vector<std::size_t>& idx) {
    const double last = static_cast<double>(h.size() - 1);
    std::vector<double> x, y;
    const std::size_t mirrored = std::min<std::size_t>(2, idx.size());
    for (std::size_t k = mirrored; k-- > 0;) {
        x.push_back(-static_cast<double>(idx[k]));
        y.push_back(h[idx[k]]);
    }
    for (std::size_t i : idx) {
        x.push_back(static_cast<double>(i));
        y.push_back(h[i]);
    }
    for (std::size_t k = 0; k < mirrored; ++k) {
        const std::size_t i = idx[idx.size() - 1 - k];
        x.push_back(2.0 * last - static_cast<double>(i));
        y.push_back(h[i]);
    }
    return natural_spline(x, y, h.size());
}

bool monotone(std::span<const double> r) {
    const auto e = find_extrema(r);
    return e.maxima.empty() || e.minima.empty();
}

}  // namespace

std::vector<double> natural_spline(std::span<const double> x, std::span<const double> y, std::size_t count) {
    const std::size_t n = x.size();
    require(n >= 2 && y.size() == n, "spline needs at least two matching knots");
    for (std::size_t i = 1; i < n; ++i) require(x[i] > x[i - 1], "spline knots must be strictly increasing");

    // Second derivatives by the tridiagonal (Thomas) solve with M_0 = M_{n-1} = 0.
    std::vector<double> m(n, 0.0);
    if (n > 2) {
        std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for (std::size_t i = 1; i < n - 2; ++i) {
            const double lower = x[i + 1] - x[i];
            const double w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i-- > 0;) {
            const double next = i + 1 < n - 2 ? m[i + 2] : 0.0;
            m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }
    }

    std::vector<double> out(count);
    std::size_t seg = 0;
    for (std::size_t t = 0; t < count; ++t) {
        const double xt = static_cast<double>(t);
        while (seg + 2 < n && xt > x[seg + 1]) ++seg;
        const double h = x[seg + 1] - x[seg];
        const double a = (x[seg + 1] - xt) / h, b = (xt - x[seg]) / h;
        out[t] = a * y[seg] + b * y[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
    }
    return out;
}

Decomposition emd_sift(std::span<const double> series, const SiftOptions& options) {
    require(series.size() >= 16, "EMD needs at least 16 samples");
    Decomposition d;
    std::vector<double> residual(series.begin(), series.end());

    const auto first = find_extrema(residual);
    if (first.maxima.size() + first.minima.size() < 4) {
        d.degenerate = true;
        d.imfs.push_back(residual);
        d.residual.assign(residual.size(), 0.0);
        return d;
    }

    while (d.imfs.size() < options.max_imfs && !monotone(residual)) {
        const auto ext = find_extrema(residual);
        if (ext.maxima.size() + ext.minima.size() < 4) break;
        std::vector<double> h = residual;
        for (std::size_t it = 0; it < options.max_sifts; ++it) {
            const auto e = find_extrema(h);
            if (e.maxima.size() < 2 || e.minima.size() < 2) break;
            const auto upper = envelope(h, e.maxima);
            const auto lower = envelope(h, e.minima);
            std::vector<double> next(h.size());
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < h.size(); ++i) {
                next[i] = h[i] - 0.5 * (upper[i] + lower[i]);
                num += (h[i] - next[i]) * (h[i] - next[i]);
                den += h[i] * h[i];
            }
            h.swap(next);
            const auto en = find_extrema(h);
            const std::size_t extrema = en.maxima.size() + en.minima.size();
            const std::size_t crossings = zero_crossings(h);
            const std::size_t gap = extrema > crossings ? extrema - crossings : crossings - extrema;
            if ((den > 0.0 && num / den < options.sd_threshold) || gap <= 1) break;
        }
        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= h[i];
        d.imfs.push_back(std::move(h));
    }
    d.residual = std::move(residual);
    return d;
}

}  // namespace mordred::emd
