#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ergo/errors.hpp"
#include "ergo/geometry.hpp"

namespace ergo::imaging {

inline constexpr int kPatch = 28;

/// Vision-token budget: a resized image may yield at most max_tokens patches
/// of kPatch x kPatch pixels, i.e. at most max_tokens * 784 pixels.
struct PixelConstraint {
    int max_tokens = 640;

    bool operator==(const PixelConstraint&) const = default;

    std::int64_t pixel_budget() const {
        return static_cast<std::int64_t>(max_tokens) * kPatch * kPatch;
    }

    /// Budget large enough that no realistic image is ever shrunk; resizing
    /// under it only aligns dimensions down to multiples of kPatch.
    static PixelConstraint unbounded() { return PixelConstraint{1 << 24}; }
};

/// Interleaved 8-bit RGB image, row-major.
struct RasterImage {
    int width = 0;
    int height = 0;
    static constexpr int channels = 3;
    std::vector<std::uint8_t> pixels;

    bool operator==(const RasterImage&) const = default;

    static RasterImage filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    geometry::CoordSpace space() const { return {width, height}; }
    std::size_t expected_bytes() const {
        return static_cast<std::size_t>(width) * height * channels;
    }
    const std::uint8_t* px(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    std::uint8_t* px(int x, int y) {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
};

struct ResizedDims {
    int width = 0;
    int height = 0;
    bool operator==(const ResizedDims&) const = default;
};

/// Target dimensions under a token budget: scale by
/// s = min(1, sqrt(budget / (w*h))), floor each scaled dimension to a
/// multiple of kPatch, and keep both at least kPatch. Never upscales and
/// never exceeds the pixel budget. Requires w, h >= kPatch (smaller inputs
/// are edge-padded by downsample before this runs).
ResizedDims smart_resize(int width, int height, const PixelConstraint& c);

/// Number of vision tokens an aligned image consumes: (w/28) * (h/28).
/// Throws AlignmentError when either dimension is not a multiple of kPatch.
long token_count(int width, int height);

/// Resamples to the smart_resize dimensions with bilinear interpolation.
/// Images already aligned and within budget come back as byte-identical
/// copies. Inputs smaller than kPatch in either dimension are edge-padded
/// up to kPatch first.
RasterImage downsample(const RasterImage& img, const PixelConstraint& c);

/// Exact pixel copy of the half-open rectangle. The box must be validated
/// against the image's coordinate space.
RasterImage crop(const RasterImage& img, const geometry::BBox& b);

/// Copy of img with every pixel inside the box set to black.
RasterImage mask_region(const RasterImage& img, const geometry::BBox& b);

// --- codecs ------------------------------------------------------------

/// Decodes a PNG or JPEG file into RGB. Throws DecodeError with the path in
/// the message on unsupported or corrupt input.
RasterImage decode_image(const std::string& path);
RasterImage decode_image_bytes(std::span<const std::uint8_t> bytes,
                               const std::string& context = "<bytes>");

/// Reads just the dimensions (PNG header / JPEG SOF) without a full decode.
geometry::CoordSpace probe_image_dims(const std::string& path);
geometry::CoordSpace probe_image_dims_bytes(std::span<const std::uint8_t> bytes,
                                            const std::string& context = "<bytes>");

/// Lossless PNG encoding with pinned filter/compression settings, so the
/// byte stream is stable for golden tests and wire fixtures.
std::vector<std::uint8_t> encode_png(const RasterImage& img);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// `data:image/png;base64,<payload>` for the chat-completions wire format.
std::string png_data_uri(const RasterImage& img);

} // namespace ergo::imaging
