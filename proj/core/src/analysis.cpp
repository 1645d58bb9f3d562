#include "dlm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dlm {

BatchPerplexitySeries batch_perplexities(const std::string& name,
                                         const std::vector<LossValue>& losses,
                                         const std::vector<size_t>& token_boundaries,
                                         size_t batch_tokens) {
    BatchPerplexitySeries s;
    s.name = name;
    s.ppl.reserve(losses.size());
    for (auto& l : losses) s.ppl.push_back(perplexity(l));
    for (size_t b : token_boundaries) {
        size_t idx = b / batch_tokens;
        if (idx < losses.size()) s.boundary_batches.push_back(idx);
    }
    return s;
}

std::vector<double> perplexity_gain(const std::vector<double>& ppl_a,
                                    const std::vector<double>& ppl_b) {
    if (ppl_a.size() != ppl_b.size()) throw std::runtime_error("series length mismatch");
    std::vector<double> gain(ppl_a.size());
    for (size_t i = 0; i < gain.size(); ++i) gain[i] = ppl_b[i] - ppl_a[i];
    return gain;
}

std::vector<double> perplexity_gain(const BatchPerplexitySeries& a,
                                    const BatchPerplexitySeries& b) {
    return perplexity_gain(a.ppl, b.ppl);
}

TokenLossDiff token_loss_diff(const std::vector<double>& loss_a,
                              const std::vector<double>& loss_b) {
    if (loss_a.empty()) throw std::runtime_error("empty sample");
    if (loss_a.size() != loss_b.size()) throw std::runtime_error("sample length mismatch");
    TokenLossDiff d;
    d.loss_a = loss_a;
    d.loss_b = loss_b;
    double max_abs = 0.0;
    for (size_t i = 0; i < loss_a.size(); ++i)
        max_abs = std::max(max_abs, std::abs(loss_a[i] - loss_b[i]));
    d.threshold = 0.10 * max_abs;
    d.marks.resize(loss_a.size(), LossMark::none);
    for (size_t i = 0; i < loss_a.size(); ++i) {
        double diff = loss_a[i] - loss_b[i];
        if (std::abs(diff) > d.threshold)
            d.marks[i] = diff < 0.0 ? LossMark::lower : LossMark::higher;
    }
    return d;
}

std::vector<double> token_losses(const std::vector<LossValue>& losses, size_t token_lo,
                                 size_t token_hi) {
    std::vector<double> out;
    size_t pos = 0;
    for (auto& l : losses) {
        for (double v : l.per_token) {
            if (pos >= token_lo && pos < token_hi) out.push_back(v);
            ++pos;
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write csv: " + path);
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
}

void write_series_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      const std::vector<size_t>& boundaries, const std::string& title) {
    const int width = 960, height = 480, margin = 40;
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    size_t n = 0;
    double lo = 1e300, hi = -1e300;
    for (auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n == 0 || hi < lo) throw std::runtime_error("nothing to plot");
    if (hi == lo) hi = lo + 1.0;

    auto sx = [&](double i) {
        return margin + (width - 2 * margin) * (n > 1 ? i / static_cast<double>(n - 1) : 0.0);
    };
    auto sy = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
       << "\" height=\"" << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
       << title << "</text>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
       << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << height - margin << "\" stroke=\"black\"/>\n";

    for (size_t b : boundaries) {
        if (b >= n) continue;
        double x = sx(static_cast<double>(b));
        os << "<line x1=\"" << x << "\" y1=\"" << margin << "\" x2=\"" << x << "\" y2=\""
           << height - margin << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4,3\"/>\n";
    }

    for (size_t si = 0; si < series.size(); ++si) {
        os << "<polyline fill=\"none\" stroke=\"" << palette[si % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < series[si].values.size(); ++i) {
            if (i) os << ' ';
            os << sx(static_cast<double>(i)) << ',' << sy(series[si].values[i]);
        }
        os << "\"/>\n";
        os << "<text x=\"" << width - margin - 140 << "\" y=\"" << margin + 16 * (si + 1)
           << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << palette[si % 6] << "\">"
           << series[si].name << "</text>\n";
    }
    os << "</svg>\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write svg: " + path);
    f << os.str();
}

}  // namespace dlm
