#include "rdlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rdlab/errors.hpp"

namespace rdlab {

const char* const tool_version = "0.1.0";

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

csv_table::csv_table(std::vector<std::string> header) : header_(std::move(header)) {}

csv_table& csv_table::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    return row_text(cells);
}

csv_table& csv_table::row_text(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw std::logic_error("csv row width does not match the header");
    rows_.push_back(cells);
    return *this;
}

std::string csv_table::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out += ',';
            out += cells[k];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

namespace {

std::string fixed(double x, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string escape(const std::string& s) {
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

std::string tick_label(double v, bool log) {
    if (log) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;

    double map(double v) const { return log ? std::log10(v) : v; }
};

axis make_axis(const std::vector<double>& vals, bool log) {
    axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : vals) {
        lo = std::min(lo, a.map(v));
        hi = std::max(hi, a.map(v));
    }
    if (log) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
    }
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.5;
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string plot_svg(const std::vector<plot_series>& series, const plot_style& style) {
    std::vector<double> xs, ys;
    std::vector<plot_series> kept;
    for (const auto& s : series) {
        plot_series k{s.name, {}, {}, s.markers};
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double x = s.x[i], y = s.y[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if ((style.log_x && x <= 0.0) || (style.log_y && y <= 0.0)) continue;
            k.x.push_back(x);
            k.y.push_back(y);
            xs.push_back(x);
            ys.push_back(y);
        }
        kept.push_back(std::move(k));
    }
    if (xs.empty()) throw config_error("plot: no plottable points");

    const axis ax = make_axis(xs, style.log_x);
    const axis ay = make_axis(ys, style.log_y);
    const double w = 640, h = 420, left = 70, right = 20, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](double v) { return left + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto py = [&](double v) { return top + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(style.title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int k = 0; k <= 4; ++k) {
        const double fx = ax.lo + (ax.hi - ax.lo) * k / 4.0;
        const double fy = ay.lo + (ay.hi - ay.lo) * k / 4.0;
        const double sx = left + pw * k / 4.0;
        const double sy = top + ph - ph * k / 4.0;
        o << "<line x1=\"" << fixed(sx) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(sx) << "\" y2=\""
          << top + ph + 5 << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << fixed(sx) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
          << tick_label(fx, ax.log) << "</text>\n";
        o << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(sy) << "\" x2=\"" << left << "\" y2=\"" << fixed(sy)
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << left - 8 << "\" y=\"" << fixed(sy + 4) << "\" text-anchor=\"end\">"
          << tick_label(fy, ay.log) << "</text>\n";
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << escape(style.x_label)
      << "</text>\n";
    o << "<text x=\"15\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << top + ph / 2 << ")\">" << escape(style.y_label) << "</text>\n";

    for (std::size_t s = 0; s < kept.size(); ++s) {
        const auto& k = kept[s];
        const char* color = palette[s % std::size(palette)];
        if (k.x.empty()) continue;
        if (k.markers || k.x.size() == 1) {
            for (std::size_t i = 0; i < k.x.size(); ++i)
                o << "<circle cx=\"" << fixed(px(k.x[i])) << "\" cy=\"" << fixed(py(k.y[i])) << "\" r=\"3\" fill=\""
                  << color << "\"/>\n";
        }
        if (!k.markers && k.x.size() > 1) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < k.x.size(); ++i) {
                if (i) o << ' ';
                o << fixed(px(k.x[i])) << ',' << fixed(py(k.y[i]));
            }
            o << "\"/>\n";
        }
        o << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 15 * static_cast<double>(s) << "\" fill=\"" << color
          << "\">" << escape(k.name) << "</text>\n";
    }
    if (!style.annotation.empty())
        o << "<text x=\"" << left + pw - 10 << "\" y=\"" << top + 16 << "\" text-anchor=\"end\">"
          << escape(style.annotation) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

nlohmann::json run_manifest::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["tool"] = "rdlab";
    j["tool_version"] = tool_version;
    j["subcommand"] = subcommand;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["threads"] = threads;
    j["config"] = config;
    j["constants"] = constants;
    j["results"] = results;
    auto t = nlohmann::json::object();
    for (const auto& [name, sec] : timings) t[name] = sec;
    j["timings_seconds"] = t;
    auto w = nlohmann::json::array();
    for (const auto& e : warnings) w.push_back({{"check", e.check}, {"message", e.message}});
    j["warnings"] = w;
    j["outputs"] = outputs;
    j["exit_code"] = exit_code;
    return j;
}

} // namespace rdlab
