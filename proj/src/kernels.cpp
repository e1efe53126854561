#include "ergo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ergo::kernels {

namespace {

// One output row of the bilinear resample. Sample positions use the
// half-pixel-center convention: src_x = (dst_x + 0.5) * (src_w/dst_w) - 0.5,
// clamped to the image border.
inline void resize_row(const std::uint8_t* src, int src_w, int src_h,
                       std::uint8_t* dst, int dst_w, int dst_h, int channels, int dy) {
    const double sx_scale = static_cast<double>(src_w) / dst_w;
    const double sy_scale = static_cast<double>(src_h) / dst_h;

    const double fy = std::max(0.0, (dy + 0.5) * sy_scale - 0.5);
    int y0 = static_cast<int>(fy);
    if (y0 > src_h - 1) y0 = src_h - 1;
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;

    const std::uint8_t* row0 = src + static_cast<std::size_t>(y0) * src_w * channels;
    const std::uint8_t* row1 = src + static_cast<std::size_t>(y1) * src_w * channels;
    std::uint8_t* out = dst + static_cast<std::size_t>(dy) * dst_w * channels;

    for (int dx = 0; dx < dst_w; ++dx) {
        const double fx = std::max(0.0, (dx + 0.5) * sx_scale - 0.5);
        int x0 = static_cast<int>(fx);
        if (x0 > src_w - 1) x0 = src_w - 1;
        const int x1 = std::min(x0 + 1, src_w - 1);
        const double wx = fx - x0;

        const std::uint8_t* p00 = row0 + static_cast<std::size_t>(x0) * channels;
        const std::uint8_t* p01 = row0 + static_cast<std::size_t>(x1) * channels;
        const std::uint8_t* p10 = row1 + static_cast<std::size_t>(x0) * channels;
        const std::uint8_t* p11 = row1 + static_cast<std::size_t>(x1) * channels;

        for (int c = 0; c < channels; ++c) {
            const double top = p00[c] + (p01[c] - p00[c]) * wx;
            const double bot = p10[c] + (p11[c] - p10[c]) * wx;
            const double v = top + (bot - top) * wy;
            out[static_cast<std::size_t>(dx) * channels + c] =
                static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
}

} // namespace

void resize_bilinear_serial(const std::uint8_t* src, int src_w, int src_h,
                            std::uint8_t* dst, int dst_w, int dst_h, int channels) {
    for (int dy = 0; dy < dst_h; ++dy) {
        resize_row(src, src_w, src_h, dst, dst_w, dst_h, channels, dy);
    }
}

void resize_bilinear(const std::uint8_t* src, int src_w, int src_h,
                     std::uint8_t* dst, int dst_w, int dst_h, int channels) {
#pragma omp parallel for schedule(static)
    for (int dy = 0; dy < dst_h; ++dy) {
        resize_row(src, src_w, src_h, dst, dst_w, dst_h, channels, dy);
    }
}

void copy_rect_serial(const std::uint8_t* src, int src_w, int x1, int y1, int x2, int y2,
                      std::uint8_t* dst, int channels) {
    const int out_w = x2 - x1;
    const std::size_t row_bytes = static_cast<std::size_t>(out_w) * channels;
    for (int y = y1; y < y2; ++y) {
        const std::uint8_t* s =
            src + (static_cast<std::size_t>(y) * src_w + x1) * channels;
        std::memcpy(dst + static_cast<std::size_t>(y - y1) * row_bytes, s, row_bytes);
    }
}

void copy_rect(const std::uint8_t* src, int src_w, int x1, int y1, int x2, int y2,
               std::uint8_t* dst, int channels) {
    const int out_w = x2 - x1;
    const std::size_t row_bytes = static_cast<std::size_t>(out_w) * channels;
#pragma omp parallel for schedule(static)
    for (int y = y1; y < y2; ++y) {
        const std::uint8_t* s =
            src + (static_cast<std::size_t>(y) * src_w + x1) * channels;
        std::memcpy(dst + static_cast<std::size_t>(y - y1) * row_bytes, s, row_bytes);
    }
}

void fill_rect_serial(std::uint8_t* buf, int w, int x1, int y1, int x2, int y2,
                      int channels, std::uint8_t value) {
    const std::size_t row_bytes = static_cast<std::size_t>(x2 - x1) * channels;
    for (int y = y1; y < y2; ++y) {
        std::memset(buf + (static_cast<std::size_t>(y) * w + x1) * channels, value, row_bytes);
    }
}

void fill_rect(std::uint8_t* buf, int w, int x1, int y1, int x2, int y2,
               int channels, std::uint8_t value) {
    const std::size_t row_bytes = static_cast<std::size_t>(x2 - x1) * channels;
#pragma omp parallel for schedule(static)
    for (int y = y1; y < y2; ++y) {
        std::memset(buf + (static_cast<std::size_t>(y) * w + x1) * channels, value, row_bytes);
    }
}

} // namespace ergo::kernels
