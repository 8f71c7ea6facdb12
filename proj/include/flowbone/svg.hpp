#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowbone::svg {

inline std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// Fixed two-decimal coordinates keep documents short and diffable.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

using Attrs = std::vector<std::pair<std::string, std::string>>;

/// Minimal streaming SVG builder; elements are written in call order.
class Document {
public:
    Document(double width, double height) : width_(width), height_(height) {}

    void style(std::string_view css) { style_ += css; }

    void defs(std::string_view raw) { defs_ += raw; }

    void element(std::string_view tag, const Attrs& attrs) {
        body_ << "  <" << tag;
        write_attrs(attrs);
        body_ << "/>\n";
    }

    void text(double x, double y, std::string_view content, const Attrs& extra = {}) {
        body_ << "  <text x=\"" << num(x) << "\" y=\"" << num(y) << "\"";
        write_attrs(extra);
        body_ << ">" << escape(content) << "</text>\n";
    }

    void open_group(const Attrs& attrs) {
        body_ << "  <g";
        write_attrs(attrs);
        body_ << ">\n";
    }

    void close_group() { body_ << "  </g>\n"; }

    void line(double x1, double y1, double x2, double y2, std::string_view cls) {
        element("line", {{"class", std::string(cls)}, {"x1", num(x1)}, {"y1", num(y1)}, {"x2", num(x2)}, {"y2", num(y2)}});
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const Attrs& attrs) {
        std::string p;
        for (const auto& [x, y] : pts) {
            if (!p.empty()) p.push_back(' ');
            p += num(x) + "," + num(y);
        }
        Attrs all = attrs;
        all.emplace_back("points", p);
        element("polyline", all);
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
            << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\">\n";
        if (!style_.empty()) out << "<style>" << escape_css(style_) << "</style>\n";
        if (!defs_.empty()) out << "<defs>\n" << defs_ << "</defs>\n";
        out << body_.str() << "</svg>\n";
        return out.str();
    }

private:
    static std::string escape_css(const std::string& css) {
        std::string out;
        for (char c : css) {
            if (c == '<') out += "&lt;";
            else if (c == '&') out += "&amp;";
            else out.push_back(c);
        }
        return out;
    }

    void write_attrs(const Attrs& attrs) {
        for (const auto& [k, v] : attrs) body_ << ' ' << k << "=\"" << escape(v) << '"';
    }

    double width_;
    double height_;
    std::string style_;
    std::string defs_;
    std::ostringstream body_;
};

}  // namespace flowbone::svg
