#include "stablesem/svg.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace stablesem {

namespace {

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
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

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace

std::string stability_svg(const StabilityGraph& g, const std::vector<std::string>& names, double pi_sel, int pi_bic,
                          const std::string& title)
{
    constexpr double width = 720, height = 420;
    constexpr double left = 60, right = 200, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const int levels = std::max(g.max_level(), 1);
    auto sx = [&](double c) { return left + plot_w * c / levels; };
    auto sy = [&](double p) { return top + plot_h * (1.0 - p); };

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n",
        width, height);
    svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
    svg += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\">{}</text>\n", left, escape(title));
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left,
                       top, plot_w, plot_h);
    for (int c = 0; c <= levels; ++c) {
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", sx(c),
                           top + plot_h + 15, c);
    }
    for (int k = 0; k <= 4; ++k) {
        const double p = k / 4.0;
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6, sy(p) + 4, p);
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">model complexity</text>\n",
                       left + plot_w / 2, height - 12);
    svg += fmt::format(
        "<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">selection "
        "probability</text>\n",
        top + plot_h / 2, top + plot_h / 2);

    int line = 0;
    const int n = g.nodes();
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b || (g.kind() == StabilityKind::edge && b < a)) continue;
            if (g.max_up_to(a, b) <= 0.0) continue;
            const char* colour = kPalette[static_cast<std::size_t>(line) % kPalette.size()];
            std::string points;
            for (int c = 0; c <= g.max_level(); ++c) {
                const auto v = g.at(a, b, c);
                if (!v) {
                    if (!points.empty()) {
                        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n", colour, points);
                        points.clear();
                    }
                    continue;
                }
                points += fmt::format("{:.1f},{:.1f} ", sx(c), sy(*v));
            }
            if (!points.empty()) {
                svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n", colour, points);
            }
            const auto label = names[a] + (g.kind() == StabilityKind::edge ? " -- " : " -> ") + names[b];
            const double ly = top + 12.0 * (line + 1);
            svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\"/>\n",
                               left + plot_w + 10, ly - 4, left + plot_w + 28, ly - 4, colour);
            svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", left + plot_w + 32, ly, escape(label));
            ++line;
        }
    }

    svg += fmt::format(
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n",
        left, sy(pi_sel), left + plot_w, sy(pi_sel));
    if (pi_bic >= 0) {
        svg += fmt::format(
            "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\" "
            "stroke-dasharray=\"2,3\"/>\n",
            sx(pi_bic), top, sx(pi_bic), top + plot_h);
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace stablesem
