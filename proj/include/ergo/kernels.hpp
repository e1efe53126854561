#pragma once

#include <cstdint>

namespace ergo::kernels {

// Raster kernels used by the imaging layer. Each kernel has a serial
// reference implementation and an OpenMP variant; both compute the same
// per-pixel function, so outputs are bit-identical regardless of thread
// count. Tests compare the two and the bench target times them.

/// Bilinear resample of an interleaved 8-bit image (half-pixel-center
/// sampling, edge clamped). In-place use is not supported.
void resize_bilinear_serial(const std::uint8_t* src, int src_w, int src_h,
                            std::uint8_t* dst, int dst_w, int dst_h, int channels);
void resize_bilinear(const std::uint8_t* src, int src_w, int src_h,
                     std::uint8_t* dst, int dst_w, int dst_h, int channels);

/// Copies the half-open rectangle [x1,x2) x [y1,y2) from src into dst
/// (dst is (x2-x1) x (y2-y1), same channel count).
void copy_rect_serial(const std::uint8_t* src, int src_w, int x1, int y1, int x2, int y2,
                      std::uint8_t* dst, int channels);
void copy_rect(const std::uint8_t* src, int src_w, int x1, int y1, int x2, int y2,
               std::uint8_t* dst, int channels);

/// Overwrites every pixel inside [x1,x2) x [y1,y2) with the given value.
void fill_rect_serial(std::uint8_t* buf, int w, int x1, int y1, int x2, int y2,
                      int channels, std::uint8_t value);
void fill_rect(std::uint8_t* buf, int w, int x1, int y1, int x2, int y2,
               int channels, std::uint8_t value);

} // namespace ergo::kernels
