#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// here deliberately avoid the library's own arithmetic paths: coverage is
// re-derived with exact rationals and with Monte-Carlo pixel membership,
// advantages with a long-double two-pass computation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ergo/geometry.hpp"
#include "ergo/imaging.hpp"

namespace testutil {

inline ergo::imaging::RasterImage gradient_image(int w, int h) {
    ergo::imaging::RasterImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(img.expected_bytes());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t* p = img.px(x, y);
            p[0] = static_cast<std::uint8_t>((x * 7 + y * 13) & 0xff);
            p[1] = static_cast<std::uint8_t>((x * 3 + y * 5 + 31) & 0xff);
            p[2] = static_cast<std::uint8_t>((x + 2 * y + 97) & 0xff);
        }
    }
    return img;
}

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("ergo_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string write_png(const TempDir& dir, const std::string& name,
                             const ergo::imaging::RasterImage& img) {
    const std::string path = dir.file(name);
    const std::vector<std::uint8_t> png = ergo::imaging::encode_png(img);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    return path;
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// --- coverage oracles ----------------------------------------------------

inline std::int64_t overlap_1d(std::int64_t a1, std::int64_t a2, std::int64_t b1,
                               std::int64_t b2) {
    const std::int64_t lo = a1 > b1 ? a1 : b1;
    const std::int64_t hi = a2 < b2 ? a2 : b2;
    return hi > lo ? hi - lo : 0;
}

/// Exact-rational coverage: per GT box all candidate ratios share the
/// denominator |g|, so the best one is picked by exact integer comparison of
/// numerators; the per-box ratios enter long double only at the final sum.
inline double exact_coverage_oracle(const std::vector<ergo::geometry::BBox>& preds,
                                    const std::vector<ergo::geometry::BBox>& gts) {
    long double sum = 0.0L;
    for (const auto& g : gts) {
        const std::int64_t den = static_cast<std::int64_t>(g.x2 - g.x1) * (g.y2 - g.y1);
        std::int64_t best_num = 0;
        for (const auto& p : preds) {
            const std::int64_t num =
                overlap_1d(p.x1, p.x2, g.x1, g.x2) * overlap_1d(p.y1, p.y2, g.y1, g.y2);
            best_num = std::max(best_num, num);
        }
        sum += static_cast<long double>(best_num) / static_cast<long double>(den);
    }
    return static_cast<double>(sum / static_cast<long double>(gts.size()));
}

/// Pixel-membership Monte Carlo: sample pixels uniformly inside each GT box
/// and count how many land in each predicted box (half-open semantics).
inline double mc_coverage_oracle(const std::vector<ergo::geometry::BBox>& preds,
                                 const std::vector<ergo::geometry::BBox>& gts,
                                 long samples_per_gt, std::uint32_t seed) {
    std::mt19937 rng(seed);
    long double sum = 0.0L;
    for (const auto& g : gts) {
        std::uniform_int_distribution<int> dx(g.x1, g.x2 - 1);
        std::uniform_int_distribution<int> dy(g.y1, g.y2 - 1);
        std::vector<long> hits(preds.size(), 0);
        for (long s = 0; s < samples_per_gt; ++s) {
            const int x = dx(rng);
            const int y = dy(rng);
            for (std::size_t i = 0; i < preds.size(); ++i) {
                const auto& p = preds[i];
                if (x >= p.x1 && x < p.x2 && y >= p.y1 && y < p.y2) ++hits[i];
            }
        }
        long best = 0;
        for (long h : hits) best = std::max(best, h);
        sum += static_cast<long double>(best) / static_cast<long double>(samples_per_gt);
    }
    return static_cast<double>(sum / static_cast<long double>(gts.size()));
}

/// Independent two-pass advantage computation in long double.
inline std::vector<double> advantage_oracle(const std::vector<double>& rewards, double epsilon) {
    const std::size_t n = rewards.size();
    long double mean = 0.0L;
    for (double r : rewards) mean += static_cast<long double>(r);
    mean /= static_cast<long double>(n);
    long double var = 0.0L;
    for (double r : rewards) {
        const long double d = static_cast<long double>(r) - mean;
        var += d * d;
    }
    var /= static_cast<long double>(n);
    const long double sigma = sqrtl(var);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<double>((static_cast<long double>(rewards[i]) - mean) /
                                     (static_cast<long double>(epsilon) + sigma));
    }
    return out;
}

/// Random valid box inside the space, at least 1x1.
inline ergo::geometry::BBox random_box(std::mt19937& rng, const ergo::geometry::CoordSpace& space) {
    std::uniform_int_distribution<int> dx(0, space.width - 1);
    std::uniform_int_distribution<int> dy(0, space.height - 1);
    int x1 = dx(rng), x2 = dx(rng);
    int y1 = dy(rng), y2 = dy(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    return {x1, y1, x2 + 1, y2 + 1, space};
}

} // namespace testutil
