#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pipeunroll/image.hpp"

namespace pipeunroll {

// Pixel classes: defects plus structural elements, with stable codes 0-8.
enum class LabelClass : std::uint8_t {
    Background = 0,
    Joint = 1,
    Connection = 2,
    Residue = 3,
    Crack = 4,
    Root = 5,
    Obstacle = 6,
    Spalling = 7,
    Shaft = 8,
};

inline constexpr int kNumClasses = 9;

const char *label_name(LabelClass c);
LabelClass label_from_name(const std::string &name);

// Display palette for mask PNGs, indexed by class code.
const std::vector<std::array<std::uint8_t, 3>> &label_palette();

using LabelMask = Mask;

// Rows index ground truth, columns prediction.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

    std::uint64_t row_sum(int gt) const;
    std::uint64_t col_sum(int pred) const;
    std::uint64_t total() const;
    ConfusionMatrix &operator+=(const ConfusionMatrix &o);
};

struct ChunkPair {
    long row_start = 0;
    ColorImage image;
    LabelMask mask;
};

// Equally sized chunks sliding along the pipe axis (rows); the final chunk is
// aligned to the image end and may overlap its predecessor more.
std::vector<ChunkPair> chunk(const ColorImage &image, const LabelMask &mask, int chunk_h,
                             int chunk_w, int stride);

// Bootstrapped cross entropy: mean of -log p over the K = ceil(N*p) smallest
// posteriors (ties broken by index order).
double bootstrapped_ce(std::span<const double> posteriors, double p);

ConfusionMatrix confusion(const LabelMask &pred, const LabelMask &gt);

// Per-class IoU averaged over the images where the class occurs in the ground
// truth; NaN for classes occurring nowhere.
std::array<double, kNumClasses> mean_iou(std::span<const ConfusionMatrix> per_image);

struct ClassStats {
    std::uint64_t objects = 0;  // 8-connected components (non-background only)
    std::uint64_t pixels = 0;
    double fraction = 0.0;
};

std::array<ClassStats, kNumClasses> class_stats(std::span<const LabelMask> masks);

// Plain-text report: per-class confusion percentages with a mean-IoU column,
// plus the class statistics table.
std::string format_report(const ConfusionMatrix &total,
                          const std::array<double, kNumClasses> &iou);
std::string format_class_stats(const std::array<ClassStats, kNumClasses> &stats);

}  // namespace pipeunroll
