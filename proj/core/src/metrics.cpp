// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "xtrack/error.hpp"

namespace xtrack {

double iou(const BBox& a, const BBox& b) {
    double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
    double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
    double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
    double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
    double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    double inter = iw * ih;
    double area_a = std::max(0.0, ax2 - ax1) * std::max(0.0, ay2 - ay1);
    double area_b = std::max(0.0, bx2 - bx1) * std::max(0.0, by2 - by1);
    double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double center_distance(const BBox& a, const BBox& b) {
    return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

EvalReport evaluate(const std::vector<BBox>& pred, const std::vector<BBox>& gt, double radius) {
    if (pred.size() != gt.size())
        throw AlignmentError("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                             std::to_string(gt.size()) + " ground-truth boxes");
    if (pred.empty()) throw DomainError("evaluate: no frames");
    EvalReport rep;
    rep.per_frame.reserve(pred.size());
    int hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        FrameScore fs;
        fs.iou = iou(pred[i], gt[i]);
        fs.center_err = center_distance(pred[i], gt[i]);
        if (fs.center_err <= radius) ++hits;
        rep.per_frame.push_back(fs);
    }
    double n = static_cast<double>(pred.size());
    double sr = 0.0;
    for (int t = 0; t <= 50; ++t) {
        double theta = t * 0.02;
        int above = 0;
        for (const FrameScore& fs : rep.per_frame)
            if (fs.iou > theta) ++above;
        sr += above / n;
    }
    rep.sr = sr / 51.0;
    rep.pr = hits / n;
    return rep;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["sr"] = report.sr;
    j["pr"] = report.pr;
    j["per_frame"] = nlohmann::json::array();
    for (const FrameScore& fs : report.per_frame)
        j["per_frame"].push_back({{"iou", fs.iou}, {"center_err", fs.center_err}});
    return j.dump(2) + "\n";
}

}  // namespace xtrack
