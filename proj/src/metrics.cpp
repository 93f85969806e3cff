#include "pipeunroll/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pipeunroll {

namespace {
constexpr const char *kNames[kNumClasses] = {"background", "joint",    "connection",
                                             "residue",    "crack",    "root",
                                             "obstacle",   "spalling", "shaft"};
}

const char *label_name(LabelClass c) { return kNames[static_cast<int>(c)]; }

LabelClass label_from_name(const std::string &name) {
    for (int i = 0; i < kNumClasses; ++i)
        if (name == kNames[i]) return static_cast<LabelClass>(i);
    throw std::invalid_argument("unknown label class: " + name);
}

const std::vector<std::array<std::uint8_t, 3>> &label_palette() {
    static const std::vector<std::array<std::uint8_t, 3>> palette = {
        {40, 40, 40},     // background
        {220, 40, 40},    // joint
        {40, 200, 40},    // connection
        {60, 80, 230},    // residue
        {230, 60, 230},   // crack
        {240, 220, 40},   // root
        {40, 220, 220},   // obstacle
        {240, 140, 40},   // spalling
        {250, 250, 250},  // shaft
    };
    return palette;
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
    return std::accumulate(counts[gt].begin(), counts[gt].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
    std::uint64_t s = 0;
    for (int g = 0; g < kNumClasses; ++g) s += counts[g][pred];
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (int g = 0; g < kNumClasses; ++g) s += row_sum(g);
    return s;
}

ConfusionMatrix &ConfusionMatrix::operator+=(const ConfusionMatrix &o) {
    for (int g = 0; g < kNumClasses; ++g)
        for (int p = 0; p < kNumClasses; ++p) counts[g][p] += o.counts[g][p];
    return *this;
}

std::vector<ChunkPair> chunk(const ColorImage &image, const LabelMask &mask, int chunk_h,
                             int chunk_w, int stride) {
    if (image.width != mask.width || image.height != mask.height)
        throw std::invalid_argument("chunk: image and mask dimensions differ");
    if (chunk_h < 1 || chunk_w < 1 || stride < 1)
        throw std::invalid_argument("chunk: chunk size and stride must be positive");
    if (chunk_w > image.width || chunk_h > image.height)
        throw std::invalid_argument("chunk: image smaller than one chunk");

    std::vector<long> starts;
    for (long s = 0; s + chunk_h <= image.height; s += stride) starts.push_back(s);
    const long last = image.height - chunk_h;
    if (starts.empty() || starts.back() != last) starts.push_back(last);

    std::vector<ChunkPair> out;
    out.reserve(starts.size());
    for (long s : starts) {
        ChunkPair c;
        c.row_start = s;
        c.image = ColorImage(chunk_w, chunk_h);
        c.mask = LabelMask(chunk_w, chunk_h);
        for (int u = 0; u < chunk_h; ++u)
            for (int v = 0; v < chunk_w; ++v) {
                c.image.at(u, v) = image.at(static_cast<int>(s) + u, v);
                c.mask.at(u, v) = mask.at(static_cast<int>(s) + u, v);
            }
        out.push_back(std::move(c));
    }
    return out;
}

double bootstrapped_ce(std::span<const double> posteriors, double p) {
    if (posteriors.empty()) throw std::invalid_argument("bootstrapped_ce: empty input");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("bootstrapped_ce: p must be in (0, 1]");
    for (double v : posteriors)
        if (!(v > 0.0 && v <= 1.0))
            throw std::invalid_argument("bootstrapped_ce: posteriors must lie in (0, 1]");

    const size_t n = posteriors.size();
    const size_t k = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return posteriors[a] < posteriors[b];  // index order breaks ties
    });

    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += -std::log(posteriors[order[i]]);
    return acc / static_cast<double>(k);
}

ConfusionMatrix confusion(const LabelMask &pred, const LabelMask &gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("confusion: mask dimensions differ");
    ConfusionMatrix m;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const int g = gt.data[i], q = pred.data[i];
        if (g >= kNumClasses || q >= kNumClasses)
            throw std::invalid_argument("confusion: class code out of range");
        ++m.counts[g][q];
    }
    return m;
}

std::array<double, kNumClasses> mean_iou(std::span<const ConfusionMatrix> per_image) {
    if (per_image.empty()) throw std::invalid_argument("mean_iou: no confusion matrices");
    std::array<double, kNumClasses> sum{};
    std::array<int, kNumClasses> images{};
    for (const ConfusionMatrix &m : per_image) {
        for (int c = 0; c < kNumClasses; ++c) {
            const std::uint64_t tp = m.counts[c][c];
            const std::uint64_t fn = m.row_sum(c) - tp;
            const std::uint64_t fp = m.col_sum(c) - tp;
            if (tp + fn == 0) continue;  // class absent in this image's ground truth
            sum[c] += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
            ++images[c];
        }
    }
    std::array<double, kNumClasses> out{};
    for (int c = 0; c < kNumClasses; ++c)
        out[c] = images[c] > 0 ? sum[c] / images[c] : std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::array<ClassStats, kNumClasses> class_stats(std::span<const LabelMask> masks) {
    if (masks.empty()) throw std::invalid_argument("class_stats: no masks");
    std::array<ClassStats, kNumClasses> stats{};
    std::uint64_t total = 0;

    for (const LabelMask &mask : masks) {
        total += mask.data.size();
        for (std::uint8_t v : mask.data) {
            if (v >= kNumClasses) throw std::invalid_argument("class_stats: class code out of range");
            ++stats[v].pixels;
        }

        // 8-connected components per non-background class.
        Mask seen(mask.width, mask.height, 0);
        std::vector<std::pair<int, int>> stack;
        for (int r = 0; r < mask.height; ++r) {
            for (int c = 0; c < mask.width; ++c) {
                const std::uint8_t cls = mask.at(r, c);
                if (cls == 0 || seen.at(r, c)) continue;
                ++stats[cls].objects;
                stack.assign(1, {r, c});
                seen.at(r, c) = 1;
                while (!stack.empty()) {
                    auto [cr, cc] = stack.back();
                    stack.pop_back();
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int nr = cr + dr, nc = cc + dc;
                            if ((dr == 0 && dc == 0) || !mask.in_bounds(nr, nc)) continue;
                            if (seen.at(nr, nc) || mask.at(nr, nc) != cls) continue;
                            seen.at(nr, nc) = 1;
                            stack.emplace_back(nr, nc);
                        }
                }
            }
        }
    }
    for (auto &s : stats)
        s.fraction = total > 0 ? static_cast<double>(s.pixels) / static_cast<double>(total) : 0.0;
    return stats;
}

std::string format_report(const ConfusionMatrix &total,
                          const std::array<double, kNumClasses> &iou) {
    std::ostringstream os;
    char buf[64];
    os << "class        ";
    for (int p = 0; p < kNumClasses; ++p) {
        std::snprintf(buf, sizeof buf, "%11.10s", kNames[p]);
        os << buf;
    }
    os << "    mean-IoU\n";
    for (int g = 0; g < kNumClasses; ++g) {
        std::snprintf(buf, sizeof buf, "%-13s", kNames[g]);
        os << buf;
        const std::uint64_t row = total.row_sum(g);
        for (int p = 0; p < kNumClasses; ++p) {
            const double pct = row > 0 ? 100.0 * static_cast<double>(total.counts[g][p]) /
                                             static_cast<double>(row)
                                       : 0.0;
            std::snprintf(buf, sizeof buf, "%11.2f", pct);
            os << buf;
        }
        if (std::isnan(iou[g]))
            os << "           -";
        else {
            std::snprintf(buf, sizeof buf, "%12.3f", iou[g]);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string format_class_stats(const std::array<ClassStats, kNumClasses> &stats) {
    std::ostringstream os;
    char buf[96];
    os << "class         objects       pixels         %\n";
    for (int c = 0; c < kNumClasses; ++c) {
        if (c == 0)
            std::snprintf(buf, sizeof buf, "%-13s %7s %12llu %9.4f\n", kNames[c], "-",
                          static_cast<unsigned long long>(stats[c].pixels), 100.0 * stats[c].fraction);
        else
            std::snprintf(buf, sizeof buf, "%-13s %7llu %12llu %9.4f\n", kNames[c],
                          static_cast<unsigned long long>(stats[c].objects),
                          static_cast<unsigned long long>(stats[c].pixels), 100.0 * stats[c].fraction);
        os << buf;
    }
    return os.str();
}

}  // namespace pipeunroll
