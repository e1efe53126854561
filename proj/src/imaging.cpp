#include "ergo/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "ergo/kernels.hpp"

namespace ergo::imaging {

RasterImage RasterImage::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RasterImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(img.expected_bytes());
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

ResizedDims smart_resize(int width, int height, const PixelConstraint& c) {
    if (width < kPatch || height < kPatch) {
        throw std::invalid_argument("smart_resize: input below one patch (" +
                                    std::to_string(width) + "x" + std::to_string(height) + ")");
    }
    if (c.max_tokens < 1) {
        throw std::invalid_argument("smart_resize: max_tokens must be >= 1");
    }
    const double budget = static_cast<double>(c.pixel_budget());
    const double pixels = static_cast<double>(width) * height;
    const double s = std::min(1.0, std::sqrt(budget / pixels));

    auto floor_align = [](double v) {
        return std::max(kPatch, static_cast<int>(std::floor(v / kPatch)) * kPatch);
    };
    int w = floor_align(s * width);
    int h = floor_align(s * height);

    // The at-least-one-patch clamp can push extreme aspect ratios over the
    // budget; shave the larger dimension back down until it fits.
    while (static_cast<std::int64_t>(w) * h > c.pixel_budget()) {
        if (w >= h && w > kPatch) {
            w -= kPatch;
        } else if (h > kPatch) {
            h -= kPatch;
        } else {
            break; // kPatch x kPatch is within any budget
        }
    }
    return {w, h};
}

long token_count(int width, int height) {
    if (width <= 0 || height <= 0 || width % kPatch != 0 || height % kPatch != 0) {
        throw AlignmentError("token_count: dimensions " + std::to_string(width) + "x" +
                             std::to_string(height) + " are not positive multiples of " +
                             std::to_string(kPatch));
    }
    return static_cast<long>(width / kPatch) * (height / kPatch);
}

namespace {

RasterImage pad_to_min(const RasterImage& img, int min_dim) {
    RasterImage out;
    out.width = std::max(img.width, min_dim);
    out.height = std::max(img.height, min_dim);
    out.pixels.resize(out.expected_bytes());
    for (int y = 0; y < out.height; ++y) {
        const int sy = std::min(y, img.height - 1);
        for (int x = 0; x < out.width; ++x) {
            const int sx = std::min(x, img.width - 1);
            const std::uint8_t* s = img.px(sx, sy);
            std::uint8_t* d = out.px(x, y);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    }
    return out;
}

void require_valid_in(const geometry::BBox& b, const RasterImage& img, const char* op) {
    if (b.space != img.space()) {
        throw SpaceMismatchError(std::string(op) + ": box space " + b.space.str() +
                                 " does not match image " + img.space().str());
    }
    if (b.x1 < 0 || b.y1 < 0 || b.x1 >= b.x2 || b.y1 >= b.y2 || b.x2 > img.width ||
        b.y2 > img.height) {
        throw InvalidRegionError(std::string(op) + ": box " + b.str() + " is not valid");
    }
}

} // namespace

RasterImage downsample(const RasterImage& img, const PixelConstraint& c) {
    if (img.pixels.size() != img.expected_bytes()) {
        throw std::invalid_argument("downsample: pixel buffer does not match dimensions");
    }
    const RasterImage* src = &img;
    RasterImage padded;
    if (img.width < kPatch || img.height < kPatch) {
        padded = pad_to_min(img, kPatch);
        src = &padded;
    }
    const ResizedDims dims = smart_resize(src->width, src->height, c);
    if (dims.width == src->width && dims.height == src->height) {
        return *src;
    }
    RasterImage out;
    out.width = dims.width;
    out.height = dims.height;
    out.pixels.resize(out.expected_bytes());
    kernels::resize_bilinear(src->pixels.data(), src->width, src->height, out.pixels.data(),
                             out.width, out.height, RasterImage::channels);
    return out;
}

RasterImage crop(const RasterImage& img, const geometry::BBox& b) {
    require_valid_in(b, img, "crop");
    RasterImage out;
    out.width = b.width();
    out.height = b.height();
    out.pixels.resize(out.expected_bytes());
    kernels::copy_rect(img.pixels.data(), img.width, b.x1, b.y1, b.x2, b.y2, out.pixels.data(),
                       RasterImage::channels);
    return out;
}

RasterImage mask_region(const RasterImage& img, const geometry::BBox& b) {
    require_valid_in(b, img, "mask_region");
    RasterImage out = img;
    kernels::fill_rect(out.pixels.data(), out.width, b.x1, b.y1, b.x2, b.y2,
                       RasterImage::channels, 0);
    return out;
}

} // namespace ergo::imaging
