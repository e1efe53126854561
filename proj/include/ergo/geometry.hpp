#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "ergo/errors.hpp"

namespace ergo::geometry {

/// A named pixel coordinate system: the width/height of the image the
/// coordinates live in.
struct CoordSpace {
    int width = 0;
    int height = 0;

    bool operator==(const CoordSpace&) const = default;

    std::int64_t area() const { return static_cast<std::int64_t>(width) * height; }
    bool valid() const { return width >= 1 && height >= 1; }
    std::string str() const;
};

/// Axis-aligned rectangle in half-open pixel coordinates: [x1,x2) x [y1,y2).
/// A BBox produced by clamp_and_validate/scale_box satisfies
/// 0 <= x1 < x2 <= space.width and 0 <= y1 < y2 <= space.height.
struct BBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;
    CoordSpace space;

    bool operator==(const BBox&) const = default;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    std::string str() const;
};

/// Box area in pixels^2. Input must have passed validation.
std::int64_t area(const BBox& b);

/// Overlap area of two boxes in the same coordinate space; 0 when disjoint.
/// Throws SpaceMismatchError when the spaces differ.
std::int64_t intersect_area(const BBox& a, const BBox& b);

/// Clips raw coordinates into the space and checks for a usable rectangle.
/// Returns nullopt for degenerate or non-finite input; never throws, so the
/// caller can take the zero-reward branch on invalid regions.
std::optional<BBox> clamp_and_validate(double x1, double y1, double x2, double y2,
                                       const CoordSpace& space);

/// area(region) / area of the whole space, in [0,1].
double area_ratio(const BBox& region, const CoordSpace& space);

/// Maps a box between coordinate spaces (nearest-integer rounding per
/// coordinate), then re-validates in the target space. A box that collapses
/// after rounding comes back nullopt.
std::optional<BBox> scale_box(const BBox& b, const CoordSpace& from, const CoordSpace& to);

/// Mean over ground-truth boxes of the best fractional coverage by any
/// predicted box: (1/|gts|) * sum_g max_p |p n g| / |g|.
/// Empty preds scores 0; empty gts throws MissingGroundTruthError.
double coverage_score(std::span<const BBox> preds, std::span<const BBox> gts);

} // namespace ergo::geometry
