#include "ergo/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ergo::geometry {

std::string CoordSpace::str() const {
    return std::to_string(width) + "x" + std::to_string(height);
}

std::string BBox::str() const {
    return "(" + std::to_string(x1) + "," + std::to_string(y1) + "," +
           std::to_string(x2) + "," + std::to_string(y2) + ")@" + space.str();
}

std::int64_t area(const BBox& b) {
    return static_cast<std::int64_t>(b.width()) * b.height();
}

std::int64_t intersect_area(const BBox& a, const BBox& b) {
    if (a.space != b.space) {
        throw SpaceMismatchError("intersect_area: boxes live in different spaces (" +
                                 a.space.str() + " vs " + b.space.str() + ")");
    }
    const std::int64_t w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const std::int64_t h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0 || h <= 0) return 0;
    return w * h;
}

std::optional<BBox> clamp_and_validate(double x1, double y1, double x2, double y2,
                                       const CoordSpace& space) {
    if (!space.valid()) return std::nullopt;
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
        return std::nullopt;
    }
    auto clip = [](double v, int hi) {
        const double r = std::round(v);
        if (r < 0.0) return 0;
        if (r > hi) return hi;
        return static_cast<int>(r);
    };
    BBox b{clip(x1, space.width), clip(y1, space.height),
           clip(x2, space.width), clip(y2, space.height), space};
    if (b.x1 >= b.x2 || b.y1 >= b.y2) return std::nullopt;
    return b;
}

double area_ratio(const BBox& region, const CoordSpace& space) {
    if (region.space != space) {
        throw SpaceMismatchError("area_ratio: region validated in " + region.space.str() +
                                 ", not in " + space.str());
    }
    return static_cast<double>(area(region)) / static_cast<double>(space.area());
}

std::optional<BBox> scale_box(const BBox& b, const CoordSpace& from, const CoordSpace& to) {
    if (b.space != from) {
        throw SpaceMismatchError("scale_box: box is not in the source space");
    }
    const double sx = static_cast<double>(to.width) / from.width;
    const double sy = static_cast<double>(to.height) / from.height;
    return clamp_and_validate(b.x1 * sx, b.y1 * sy, b.x2 * sx, b.y2 * sy, to);
}

double coverage_score(std::span<const BBox> preds, std::span<const BBox> gts) {
    if (gts.empty()) {
        throw MissingGroundTruthError("coverage_score: no ground-truth boxes");
    }
    double sum = 0.0;
    for (const BBox& g : gts) {
        double best = 0.0;
        for (const BBox& p : preds) {
            const double frac =
                static_cast<double>(intersect_area(p, g)) / static_cast<double>(area(g));
            best = std::max(best, frac);
        }
        sum += best;
    }
    return sum / static_cast<double>(gts.size());
}

} // namespace ergo::geometry
