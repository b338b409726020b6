#pragma once

// Presentation only: bar chart SVG generated from a report JSON.

#include <array>
#include <cstdio>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace memcycle {

inline std::string report_to_svg(const nlohmann::ordered_json& report) {
    static const std::array<std::pair<const char*, const char*>, 5> columns = {
        {{"Multi-Hop", "multi_hop"},
         {"Temporal", "temporal"},
         {"Open-Domain", "open_domain"},
         {"Single-Hop", "single_hop"},
         {"Overall", "overall"}}};
    static const std::array<std::pair<const char*, const char*>, 3> metrics = {
        {{"f1", "#4c78a8"}, {"b1", "#f58518"}, {"acc", "#54a24b"}}};

    const auto& aggregates = report.at("aggregates");
    const int group_width = 110;
    const int bar_width = 26;
    const int chart_height = 240;
    const int left = 50;
    const int top = 30;
    const int width = left + group_width * static_cast<int>(columns.size()) + 30;
    const int height = top + chart_height + 60;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
    svg << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">"
        << "memcycle metrics (%)</text>\n";
    for (int tick = 0; tick <= 100; tick += 25) {
        int y = top + chart_height - chart_height * tick / 100;
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\""
            << width - 20 << "\" y2=\"" << y
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"10\" text-anchor=\"end\">" << tick
            << "</text>\n";
    }
    int gx = left;
    for (const auto& [label, key] : columns) {
        if (aggregates.contains(key)) {
            int bx = gx + 8;
            for (const auto& [metric, color] : metrics) {
                double value = aggregates.at(key).at(metric).get<double>();
                int bar_height =
                    static_cast<int>(chart_height * value / 100.0 + 0.5);
                int y = top + chart_height - bar_height;
                svg << "<rect x=\"" << bx << "\" y=\"" << y << "\" width=\""
                    << bar_width << "\" height=\"" << bar_height
                    << "\" fill=\"" << color << "\"/>\n";
                char value_buf[16];
                std::snprintf(value_buf, sizeof(value_buf), "%.1f", value);
                svg << "<text x=\"" << bx + bar_width / 2 << "\" y=\""
                    << y - 3 << "\" font-size=\"9\" text-anchor=\"middle\">"
                    << value_buf << "</text>\n";
                bx += bar_width + 4;
            }
        }
        svg << "<text x=\"" << gx + group_width / 2 - 8 << "\" y=\""
            << top + chart_height + 16
            << "\" font-size=\"11\" text-anchor=\"middle\">" << label
            << "</text>\n";
        gx += group_width;
    }
    int lx = left;
    int ly = top + chart_height + 36;
    static const std::array<const char*, 3> legend = {"F1", "B1", "ACC"};
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        svg << "<rect x=\"" << lx << "\" y=\"" << ly - 9
            << "\" width=\"10\" height=\"10\" fill=\"" << metrics[i].second
            << "\"/>\n";
        svg << "<text x=\"" << lx + 14 << "\" y=\"" << ly
            << "\" font-size=\"11\">" << legend[i] << "</text>\n";
        lx += 60;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace memcycle
