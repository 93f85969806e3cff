#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pipeunroll/metrics.hpp"

using namespace pipeunroll;

namespace {

// Sort-and-average reference for the bootstrapped loss.
double bootstrapped_ce_oracle(std::vector<double> posteriors, double p) {
    const size_t n = posteriors.size();
    const size_t k = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    std::stable_sort(posteriors.begin(), posteriors.end());
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += -std::log(posteriors[i]);
    return acc / static_cast<double>(k);
}

LabelMask mask_of(int w, int h, std::initializer_list<int> values) {
    LabelMask m(w, h);
    auto it = values.begin();
    for (auto &v : m.data) v = static_cast<std::uint8_t>(*it++);
    return m;
}

}  // namespace

TEST_CASE("chunking covers the image with aligned final chunk") {
    ColorImage img(1200, 1800, Pixel{1, 1, 1});
    LabelMask mask(1200, 1800, 0);

    auto exact = chunk(img, mask, 1800, 1200, 600);
    CHECK(exact.size() == 1);
    CHECK(exact[0].row_start == 0);

    auto chunks = chunk(img, mask, 600, 1200, 300);
    REQUIRE(chunks.size() == 5);
    std::vector<long> starts;
    for (const auto &c : chunks) starts.push_back(c.row_start);
    CHECK(starts == std::vector<long>{0, 300, 600, 900, 1200});

    // Coverage scan: every pixel row belongs to at least one chunk.
    std::vector<int> cover(1800, 0);
    for (const auto &c : chunks)
        for (int u = 0; u < 600; ++u) ++cover[c.row_start + u];
    CHECK(*std::min_element(cover.begin(), cover.end()) >= 1);

    // Stride not dividing the length: the last chunk re-aligns to the end.
    auto ragged = chunk(img, mask, 700, 1200, 600);
    CHECK(ragged.back().row_start == 1800 - 700);
    std::vector<int> cover2(1800, 0);
    for (const auto &c : ragged)
        for (int u = 0; u < 700; ++u) ++cover2[c.row_start + u];
    CHECK(*std::min_element(cover2.begin(), cover2.end()) >= 1);

    CHECK_THROWS_AS(chunk(img, mask, 2000, 1200, 600), std::invalid_argument);
}

TEST_CASE("bootstrapped cross entropy selects the K hardest pixels") {
    std::vector<double> ones(10, 1.0);
    CHECK(bootstrapped_ce(ones, 0.5) == 0.0);

    // N = 10, p = 0.1: only the minimum posterior contributes.
    std::vector<double> ten = {0.9, 0.8, 0.3, 0.95, 0.99, 0.7, 0.85, 0.6, 0.75, 0.82};
    CHECK(bootstrapped_ce(ten, 0.1) == doctest::Approx(-std::log(0.3)).epsilon(1e-15));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> post(1e-6, 1.0);
    std::vector<double> big(1000);
    for (double &v : big) v = post(rng);
    for (double p : {0.1, 0.25, 0.5, 1.0})
        CHECK(bootstrapped_ce(big, p) == doctest::Approx(bootstrapped_ce_oracle(big, p)).epsilon(1e-12));

    // Plain mean cross entropy at p = 1.
    double mean_ce = 0.0;
    for (double v : big) mean_ce += -std::log(v);
    mean_ce /= big.size();
    CHECK(bootstrapped_ce(big, 1.0) == doctest::Approx(mean_ce).epsilon(1e-12));

    // Non-increasing in p.
    double prev = bootstrapped_ce(big, 0.05);
    for (double p = 0.1; p <= 1.0; p += 0.05) {
        const double cur = bootstrapped_ce(big, p);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }

    CHECK_THROWS_AS(bootstrapped_ce({}, 0.5), std::invalid_argument);
    std::vector<double> bad = {0.5, 0.0};
    CHECK_THROWS_AS(bootstrapped_ce(bad, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(bootstrapped_ce(ten, 0.0), std::invalid_argument);
}

TEST_CASE("confusion counts pixels by ground truth and prediction") {
    LabelMask gt = mask_of(2, 2, {0, 0, 4, 4});
    ConfusionMatrix diag = confusion(gt, gt);
    CHECK(diag.counts[0][0] == 2);
    CHECK(diag.counts[4][4] == 2);
    CHECK(diag.total() == 4);

    LabelMask all_crack = mask_of(2, 2, {4, 4, 4, 4});
    LabelMask all_bg = mask_of(2, 2, {0, 0, 0, 0});
    ConfusionMatrix off = confusion(all_crack, all_bg);
    CHECK(off.counts[0][4] == 4);
    CHECK(off.row_sum(0) == 4);

    // Random masks against a naive double loop.
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
    LabelMask a(4, 4), b(4, 4);
    for (auto &v : a.data) v = static_cast<std::uint8_t>(cls(rng));
    for (auto &v : b.data) v = static_cast<std::uint8_t>(cls(rng));
    ConfusionMatrix m = confusion(a, b);
    for (int g = 0; g < kNumClasses; ++g)
        for (int p = 0; p < kNumClasses; ++p) {
            std::uint64_t naive = 0;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    if (b.at(r, c) == g && a.at(r, c) == p) ++naive;
            CHECK(m.counts[g][p] == naive);
        }

    LabelMask small(2, 1, 0);
    CHECK_THROWS_AS(confusion(small, gt), std::invalid_argument);
}

TEST_CASE("mean IoU averages per image over occurring classes") {
    LabelMask gt = mask_of(2, 2, {0, 0, 4, 4});
    std::vector<ConfusionMatrix> perfect = {confusion(gt, gt)};
    auto iou = mean_iou(perfect);
    CHECK(iou[0] == 1.0);
    CHECK(iou[4] == 1.0);
    CHECK(std::isnan(iou[5]));  // class occurs in no image

    // Hand-computed two-image fixture.
    // Image 1: gt = [bg bg crack crack], pred = [bg crack crack crack]
    //   background: TP=1 FN=1 FP=0 -> 1/2; crack: TP=2 FP=1 FN=0 -> 2/3.
    // Image 2: gt = [bg root root bg], pred = [bg bg root root]
    //   background: TP=1 FN=1 FP=1 -> 1/3; root: TP=1 FN=1 FP=1 -> 1/3;
    //   crack absent -> image excluded from crack's mean.
    LabelMask gt1 = mask_of(4, 1, {0, 0, 4, 4});
    LabelMask pr1 = mask_of(4, 1, {0, 4, 4, 4});
    LabelMask gt2 = mask_of(4, 1, {0, 5, 5, 0});
    LabelMask pr2 = mask_of(4, 1, {0, 0, 5, 5});
    std::vector<ConfusionMatrix> two = {confusion(pr1, gt1), confusion(pr2, gt2)};
    auto iou2 = mean_iou(two);
    CHECK(iou2[0] == doctest::Approx((0.5 + 1.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK(iou2[4] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(iou2[5] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    for (int c = 0; c < kNumClasses; ++c)
        if (!std::isnan(iou2[c])) CHECK((iou2[c] >= 0.0 && iou2[c] <= 1.0));
}

TEST_CASE("class statistics count components, pixels and fractions") {
    LabelMask empty(10, 10, 0);
    std::vector<LabelMask> only_bg = {empty};
    auto stats = class_stats(only_bg);
    CHECK(stats[0].fraction == 1.0);
    for (int c = 1; c < kNumClasses; ++c) {
        CHECK(stats[c].objects == 0);
        CHECK(stats[c].pixels == 0);
    }

    // Two disjoint crack blobs, one of them diagonal-connected.
    LabelMask blobs(8, 8, 0);
    blobs.at(1, 1) = 4;
    blobs.at(2, 2) = 4;  // 8-connectivity joins the diagonal
    blobs.at(6, 6) = 4;
    std::vector<LabelMask> one = {blobs};
    auto s = class_stats(one);
    CHECK(s[static_cast<int>(LabelClass::Crack)].objects == 2);
    CHECK(s[static_cast<int>(LabelClass::Crack)].pixels == 3);

    double fraction_sum = 0.0;
    for (const auto &cs : s) fraction_sum += cs.fraction;
    CHECK(fraction_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("label names round trip") {
    for (int c = 0; c < kNumClasses; ++c)
        CHECK(label_from_name(label_name(static_cast<LabelClass>(c))) ==
              static_cast<LabelClass>(c));
    CHECK_THROWS_AS(label_from_name("granite"), std::invalid_argument);
    CHECK(label_palette().size() == kNumClasses);
}
