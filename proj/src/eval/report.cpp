// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/eval/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

namespace dragon {

namespace {

struct Column {
    const char* header;
    double GroupMeans::*field;
    bool higher_is_better;
    const GroupMeans MetricReport::*group;
};

const Column kColumns[] = {
    {"gd_psnr", &GroupMeans::psnr, true, &MetricReport::ground_drone},
    {"gd_ssim", &GroupMeans::ssim, true, &MetricReport::ground_drone},
    {"gd_perc", &GroupMeans::perceptual, false, &MetricReport::ground_drone},
    {"mid_psnr", &GroupMeans::psnr, true, &MetricReport::mid},
    {"mid_ssim", &GroupMeans::ssim, true, &MetricReport::mid},
    {"mid_perc", &GroupMeans::perceptual, false, &MetricReport::mid},
    {"all_psnr", &GroupMeans::psnr, true, &MetricReport::all},
    {"all_ssim", &GroupMeans::ssim, true, &MetricReport::all},
    {"all_perc", &GroupMeans::perceptual, false, &MetricReport::all},
};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

Comparison compare_methods(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw InvalidInput("compare_methods: no reports");
    for (const auto& r : reports) {
        bool same = r.images.size() == reports[0].images.size() && r.max_elevation == reports[0].max_elevation;
        for (std::size_t i = 0; same && i < r.images.size(); ++i)
            same = r.images[i].image == reports[0].images[i].image &&
                   r.images[i].elevation == reports[0].images[i].elevation;
        if (!same) throw InvalidInput("compare_methods: '" + r.method + "' uses a different test set");
    }
    const std::size_t n = reports.size();
    std::vector<std::vector<bool>> best(n, std::vector<bool>(std::size(kColumns), false));
    for (std::size_t c = 0; c < std::size(kColumns); ++c) {
        const auto& col = kColumns[c];
        for (std::size_t i = 0; i < n && n > 1; ++i) {
            const double vi = (reports[i].*col.group).*col.field;
            bool strict = true;
            for (std::size_t j = 0; j < n && strict; ++j) {
                if (j == i) continue;
                const double vj = (reports[j].*col.group).*col.field;
                strict = col.higher_is_better ? vi > vj : vi < vj;
            }
            best[i][c] = strict;
        }
    }

    Comparison out;
    std::ostringstream csv, text;
    csv << "method";
    for (const auto& col : kColumns) csv << ',' << col.header;
    csv << '\n';
    text << "perceptual metric: " << reports[0].perceptual_name << '\n';
    std::size_t name_w = 6;
    for (const auto& r : reports) name_w = std::max(name_w, r.method.size());
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.insert(0, w - s.size(), ' ');
        return s;
    };
    std::string head = "method";
    head.resize(name_w, ' ');
    text << head;
    for (const auto& col : kColumns) text << pad(col.header, 11);
    text << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = reports[i];
        csv << r.method;
        std::string name = r.method;
        name.resize(name_w, ' ');
        text << name;
        for (std::size_t c = 0; c < std::size(kColumns); ++c) {
            const auto& col = kColumns[c];
            const double v = (r.*col.group).*col.field;
            const std::string mark = best[i][c] ? "*" : "";
            csv << ',' << fixed(v, 4) << mark;
            text << pad(fixed(v, col.field == &GroupMeans::psnr ? 2 : 4) + (best[i][c] ? "*" : " "), 11);
        }
        csv << '\n';
        text << '\n';
    }
    out.csv = csv.str();
    out.text = text.str();
    return out;
}

std::string metrics_csv(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    out << "method,image,elevation,psnr,ssim,perceptual\n";
    for (const auto& r : reports)
        for (const auto& m : r.images)
            out << r.method << ',' << m.image << ',' << m.elevation << ',' << format_double(m.psnr) << ','
                << format_double(m.ssim) << ',' << format_double(m.perceptual) << '\n';
    return out.str();
}

std::vector<MetricReport> parse_metrics_csv(const std::string& text, int max_elevation,
                                           const std::string& perceptual_name) {
    std::vector<MetricReport> reports;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "method,image,elevation,psnr,ssim,perceptual")
        throw IoError("metrics csv: unexpected header");
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw IoError("metrics csv: row " + std::to_string(row) + " has " + std::to_string(f.size()) + " fields");
        if (reports.empty() || reports.back().method != f[0]) {
            for (const auto& r : reports)
                if (r.method == f[0]) throw IoError("metrics csv: rows of '" + f[0] + "' are not contiguous");
            MetricReport r;
            r.method = f[0];
            r.perceptual_name = perceptual_name;
            r.max_elevation = max_elevation;
            reports.push_back(std::move(r));
        }
        ImageMetrics m;
        m.image = f[1];
        m.elevation = static_cast<int>(parse_int(f[2]));
        if (m.elevation < 0 || m.elevation > max_elevation)
            throw InvalidInput("metrics csv: elevation of '" + m.image + "' is outside 0.." + std::to_string(max_elevation));
        m.psnr = parse_double(f[3]);
        m.ssim = parse_double(f[4]);
        m.perceptual = parse_double(f[5]);
        reports.back().images.push_back(std::move(m));
    }
    for (auto& r : reports) compute_group_means(r);
    return reports;
}

std::string metric_report_json(const MetricReport& report) {
    auto group = [](const GroupMeans& g) {
        nlohmann::ordered_json j;
        j["count"] = g.count;
        j["psnr"] = g.psnr;
        j["ssim"] = g.ssim;
        j["perceptual"] = g.perceptual;
        return j;
    };
    nlohmann::ordered_json j;
    j["method"] = report.method;
    j["perceptual_metric"] = report.perceptual_name;
    j["max_elevation"] = report.max_elevation;
    j["images"] = report.images.size();
    j["ground_drone"] = group(report.ground_drone);
    j["mid"] = group(report.mid);
    j["all"] = group(report.all);
    return j.dump(2) + "\n";
}

} // namespace dragon
