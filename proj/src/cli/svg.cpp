#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mordred/cli.hpp"
#include "mordred/metrics.hpp"

namespace mordred::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kFanHeight = 280.0;
constexpr double kGap = 40.0;
constexpr double kTimingHeight = 120.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double top, height, lo, hi;
    std::size_t horizon;

    double x(double k) const {
        const double span = horizon > 1 ? static_cast<double>(horizon - 1) : 1.0;
        return kLeft + (kWidth - kLeft - kRight) * k / span;
    }
    double y(double v) const { return top + height * (hi - v) / (hi - lo); }
};

std::pair<double, double> padded_range(double lo, double hi) {
    if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

void axes(std::ostringstream& out, const Frame& f, const std::string& label) {
    const double bottom = f.top + f.height;
    out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(f.top) << "\" width=\"" << num(kWidth - kLeft - kRight)
        << "\" height=\"" << num(f.height) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(f.top + 10) << "\" text-anchor=\"end\">" << num(f.hi)
        << "</text>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(bottom) << "\" text-anchor=\"end\">" << num(f.lo)
        << "</text>\n";
    out << "<text x=\"" << num(kLeft) << "\" y=\"" << num(bottom + 16) << "\">0</text>\n";
    out << "<text x=\"" << num(kWidth - kRight) << "\" y=\"" << num(bottom + 16) << "\" text-anchor=\"end\">"
        << (f.horizon > 0 ? f.horizon - 1 : 0) << "</text>\n";
    out << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(bottom + 16) << "\" text-anchor=\"middle\">" << label
        << "</text>\n";
}

void polyline(std::ostringstream& out, const Frame& f, const std::vector<double>& values, const char* id,
              const char* style) {
    out << "<polyline id=\"" << id << "\" " << style << " points=\"";
    for (std::size_t k = 0; k < values.size(); ++k)
        out << (k ? " " : "") << num(f.x(static_cast<double>(k))) << ',' << num(f.y(values[k]));
    out << "\"/>\n";
}

}  // namespace

std::string fan_chart_svg(const ForecastDistribution& dist, const std::vector<double>& truth,
                          const std::string& title, const std::optional<TimingPanel>& timing) {
    const std::size_t h = dist.horizon();
    const auto lower = metrics::quantile_series(dist, 0.025).values;
    const auto upper = metrics::quantile_series(dist, 0.975).values;
    const auto median = metrics::quantile_series(dist, 0.5).values;
    const std::size_t shown_truth = std::min(truth.size(), h);

    double lo = *std::min_element(lower.begin(), lower.end());
    double hi = *std::max_element(upper.begin(), upper.end());
    for (std::size_t k = 0; k < shown_truth; ++k) {
        lo = std::min(lo, truth[k]);
        hi = std::max(hi, truth[k]);
    }
    const auto [ylo, yhi] = padded_range(lo, hi);
    const Frame fan{kTop, kFanHeight, ylo, yhi, h};

    const double height = kTop + kFanHeight + (timing ? kGap + kTimingHeight : 0.0) + 30.0;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<title>" << escape(title) << "</title>\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(kLeft) << "\" y=\"18\" font-size=\"13\">" << escape(title) << "</text>\n";
    axes(out, fan, "step");

    out << "<polygon id=\"band\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
    for (std::size_t k = 0; k < h; ++k)
        out << (k ? " " : "") << num(fan.x(static_cast<double>(k))) << ',' << num(fan.y(upper[k]));
    for (std::size_t k = h; k-- > 0;) out << ' ' << num(fan.x(static_cast<double>(k))) << ',' << num(fan.y(lower[k]));
    out << "\"/>\n";
    polyline(out, fan, median, "median", "fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"");
    if (shown_truth > 0)
        polyline(out, fan, std::vector<double>(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(shown_truth)),
                 "truth", "fill=\"none\" stroke=\"#d62728\" stroke-width=\"1\"");

    if (timing) {
        const auto& d = timing->density;
        const double dmax = d.empty() ? 1.0 : std::max(*std::max_element(d.begin(), d.end()), 1e-12);
        const Frame tf{kTop + kFanHeight + kGap, kTimingHeight, 0.0, dmax * 1.05, h};
        axes(out, tf, "event timing");
        polyline(out, tf, d, "timing-density", "fill=\"none\" stroke=\"#31a354\" stroke-width=\"1.5\"");
        for (std::size_t t : timing->true_timings)
            out << "<line class=\"true-event\" x1=\"" << num(tf.x(static_cast<double>(t))) << "\" y1=\"" << num(tf.top)
                << "\" x2=\"" << num(tf.x(static_cast<double>(t))) << "\" y2=\"" << num(tf.top + tf.height)
                << "\" stroke=\"#d62728\" stroke-dasharray=\"3,3\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace mordred::cli
