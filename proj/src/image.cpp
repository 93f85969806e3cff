#include "pipeunroll/image.hpp"

#include <algorithm>
#include <cmath>

namespace pipeunroll {

Image to_gray(const ColorImage &img) {
    Image out(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = luminance(img.data[i]);
    return out;
}

std::uint8_t to_byte(float v) {
    float r = std::round(v);
    if (r <= 0.0f) return 0;
    if (r >= 255.0f) return 255;
    return static_cast<std::uint8_t>(r);
}

namespace {

struct BilinearWeights {
    int x0, y0, x1, y1;
    double wx, wy;
};

template <typename G>
BilinearWeights clamp_weights(const G &img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    BilinearWeights w;
    w.x0 = static_cast<int>(std::floor(x));
    w.y0 = static_cast<int>(std::floor(y));
    w.x1 = std::min(w.x0 + 1, img.width - 1);
    w.y1 = std::min(w.y0 + 1, img.height - 1);
    w.wx = x - w.x0;
    w.wy = y - w.y0;
    return w;
}

std::vector<double> gaussian_kernel(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (double &v : k) v /= sum;
    return k;
}

// One separable pass along a direction; weights renormalized over in-bounds,
// valid taps.
template <typename TIn, typename TOut>
void blur_pass(const Grid<TIn> &src, Grid<TOut> &dst, const std::vector<double> &kernel,
               bool horizontal, const Mask *valid) {
    const int radius = static_cast<int>(kernel.size() / 2);
    for (int r = 0; r < src.height; ++r) {
        for (int c = 0; c < src.width; ++c) {
            double acc = 0.0, wsum = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int rr = horizontal ? r : r + i;
                int cc = horizontal ? c + i : c;
                if (!src.in_bounds(rr, cc)) continue;
                if (valid && !valid->at(rr, cc)) continue;
                double w = kernel[i + radius];
                acc += w * src.at(rr, cc);
                wsum += w;
            }
            dst.at(r, c) = wsum > 0.0 ? static_cast<TOut>(acc / wsum)
                                      : static_cast<TOut>(src.at(r, c));
        }
    }
}

}  // namespace

float sample_bilinear(const Image &img, double x, double y) {
    if (img.empty()) throw std::invalid_argument("sample_bilinear: empty image");
    auto w = clamp_weights(img, x, y);
    double top = (1.0 - w.wx) * img.at(w.y0, w.x0) + w.wx * img.at(w.y0, w.x1);
    double bot = (1.0 - w.wx) * img.at(w.y1, w.x0) + w.wx * img.at(w.y1, w.x1);
    return static_cast<float>((1.0 - w.wy) * top + w.wy * bot);
}

Pixel sample_bilinear(const ColorImage &img, double x, double y) {
    if (img.empty()) throw std::invalid_argument("sample_bilinear: empty image");
    auto w = clamp_weights(img, x, y);
    Pixel out;
    for (int ch = 0; ch < 3; ++ch) {
        double top = (1.0 - w.wx) * img.at(w.y0, w.x0)[ch] + w.wx * img.at(w.y0, w.x1)[ch];
        double bot = (1.0 - w.wx) * img.at(w.y1, w.x0)[ch] + w.wx * img.at(w.y1, w.x1)[ch];
        out[ch] = static_cast<float>((1.0 - w.wy) * top + w.wy * bot);
    }
    return out;
}

Image gaussian_blur(const Image &img, double sigma, const Mask *valid) {
    if (sigma <= 0.0) return img;
    if (valid && (valid->width != img.width || valid->height != img.height))
        throw std::invalid_argument("gaussian_blur: mask size mismatch");
    auto kernel = gaussian_kernel(sigma);
    Image tmp(img.width, img.height), out(img.width, img.height);
    blur_pass(img, tmp, kernel, true, valid);
    blur_pass(tmp, out, kernel, false, valid);
    return out;
}

Grid<double> gaussian_blur_double(const Image &img, double sigma, const Mask *valid) {
    Grid<double> out(img.width, img.height);
    if (sigma <= 0.0) {
        for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i];
        return out;
    }
    if (valid && (valid->width != img.width || valid->height != img.height))
        throw std::invalid_argument("gaussian_blur: mask size mismatch");
    auto kernel = gaussian_kernel(sigma);
    Grid<double> tmp(img.width, img.height);
    blur_pass(img, tmp, kernel, true, valid);
    blur_pass(tmp, out, kernel, false, valid);
    return out;
}

}  // namespace pipeunroll
