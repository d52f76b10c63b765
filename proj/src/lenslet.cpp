#include "lf/lenslet.hpp"

#include <algorithm>
#include <cmath>

#include "lf/color.hpp"
#include "lf/parallel.hpp"

namespace lf::lenslet {

int channel_at(BayerPattern p, int x, int y) {
    // 2x2 cell, index (y&1)*2 + (x&1); 0=R 1=G 2=B.
    static constexpr int kCell[4][4] = {
        {0, 1, 1, 2}, // RGGB
        {1, 0, 2, 1}, // GRBG
        {1, 2, 0, 1}, // GBRG
        {2, 1, 1, 0}, // BGGR
    };
    return kCell[static_cast<int>(p)][(y & 1) * 2 + (x & 1)];
}

void lenslet_centre(const LensletGrid& g, int s, int t, double& cx, double& cy) {
    double shift = (g.layout == LensletLayout::HexRowOffset && (s & 1))
                       ? g.spacing_x * 0.5
                       : 0.0;
    double lx = t * g.spacing_x + shift;
    double ly = s * g.spacing_y;
    double cr = std::cos(g.rotation), sr = std::sin(g.rotation);
    cx = g.offset_x + cr * lx - sr * ly;
    cy = g.offset_y + sr * lx + cr * ly;
}

double quantile(std::vector<float> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile: empty input");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0,1]");
    double rank = p * (static_cast<double>(values.size()) - 1.0);
    size_t lo = static_cast<size_t>(rank);
    double frac = rank - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + lo, values.end());
    double vlo = values[lo];
    if (frac == 0.0 || lo + 1 >= values.size()) return vlo;
    float vhi = *std::min_element(values.begin() + lo + 1, values.end());
    return vlo + frac * (static_cast<double>(vhi) - vlo);
}

Image normalize_white_image(const WhiteImage& wi, const WhiteBalance& wb,
                            double percentile) {
    if (wi.sensor.channels != 1)
        throw std::invalid_argument("normalize_white_image: mosaic must be 1 channel");
    if (wb.r <= 0 || wb.b <= 0)
        throw std::invalid_argument("normalize_white_image: gains must be positive");
    if (percentile <= 0.0 || percentile > 1.0)
        throw std::invalid_argument("normalize_white_image: percentile outside (0,1]");
    Image out = wi.sensor;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            int ch = channel_at(wi.pattern, x, y);
            if (ch == 0)
                out.at(x, y, 0) = static_cast<float>(out.at(x, y, 0) * wb.r);
            else if (ch == 2)
                out.at(x, y, 0) = static_cast<float>(out.at(x, y, 0) * wb.b);
        }
    }
    double q = quantile(out.data, percentile);
    if (!(q > 0.0))
        throw std::invalid_argument("normalize_white_image: non-positive quantile (degenerate white image)");
    float inv = static_cast<float>(1.0 / q);
    for (float& v : out.data) v *= inv;
    return out;
}

DevignetteResult devignette(const PlenopticRaw& raw, const Image& wi_norm,
                            double epsilon_wi) {
    if (raw.sensor.channels != 1 || wi_norm.channels != 1)
        throw std::invalid_argument("devignette: 1-channel images required");
    if (!raw.sensor.same_shape(wi_norm))
        throw std::invalid_argument("devignette: raw and white image shapes differ");
    DevignetteResult res;
    res.image = Image(raw.sensor.width, raw.sensor.height, 1);
    res.saturated.assign(res.image.data.size(), 0);
    res.unreliable.assign(res.image.data.size(), 0);
    for (size_t i = 0; i < res.image.data.size(); ++i) {
        float w = wi_norm.data[i];
        if (w < epsilon_wi) {
            res.image.data[i] = 0.0f;
            res.unreliable[i] = 1;
            ++res.unreliable_count;
            continue;
        }
        float v = raw.sensor.data[i] / w;
        if (v > 1.0f) {
            v = 1.0f;
            res.saturated[i] = 1;
            ++res.saturated_count;
        }
        res.image.data[i] = v;
    }
    return res;
}

// Catmull-Rom kernel weight at signed distance d (support 2).
static double cubic_weight(double d) {
    d = std::abs(d);
    if (d <= 1.0) return ((1.5 * d - 2.5) * d) * d + 1.0;
    if (d < 2.0) return ((-0.5 * d + 2.5) * d - 4.0) * d + 2.0;
    return 0.0;
}

//! Weighted bicubic sample at (px, py); `wi` may be null for unit weights.
//! Falls back to unit weights when the weight mass drops below eps_w.
static void sample_bicubic(const Image& rgb, const Image* wi, double px,
                           double py, double eps_w, float* out3) {
    int x0 = static_cast<int>(std::floor(px));
    int y0 = static_cast<int>(std::floor(py));
    double kx[4], ky[4];
    int xs[4], ys[4];
    for (int i = 0; i < 4; ++i) {
        int tx = x0 - 1 + i, ty = y0 - 1 + i;
        kx[i] = cubic_weight(px - tx);
        ky[i] = cubic_weight(py - ty);
        xs[i] = std::clamp(tx, 0, rgb.width - 1);
        ys[i] = std::clamp(ty, 0, rgb.height - 1);
    }
    for (int pass = 0; pass < 2; ++pass) {
        const bool guided = (wi != nullptr) && pass == 0;
        double s0 = 0.0, s1[3] = {0.0, 0.0, 0.0};
        for (int j = 0; j < 4; ++j) {
            for (int i = 0; i < 4; ++i) {
                double k = kx[i] * ky[j];
                if (k == 0.0) continue;
                double w = guided ? k * wi->at(xs[i], ys[j], 0) : k;
                s0 += w;
                for (int c = 0; c < rgb.channels; ++c)
                    s1[c] += w * rgb.at(xs[i], ys[j], c);
            }
        }
        if (guided && std::abs(s0) < eps_w) continue; // retry unweighted
        for (int c = 0; c < rgb.channels; ++c)
            out3[c] = static_cast<float>(std::clamp(s1[c] / s0, 0.0, 1.0));
        return;
    }
}

LightField extract_views(const Image& rgb, const Image& wi_norm,
                         const LensletGrid& grid, const DecodeParams& params) {
    if (rgb.channels != 3)
        throw std::invalid_argument("extract_views: RGB input required");
    if (wi_norm.channels != 1 || wi_norm.width != rgb.width ||
        wi_norm.height != rgb.height)
        throw std::invalid_argument("extract_views: white image shape mismatch");
    if (grid.lens_rows <= 0 || grid.lens_cols <= 0)
        throw std::invalid_argument("extract_views: empty lenslet grid");
    if (grid.spacing_x <= 0 || grid.spacing_y <= 0)
        throw std::invalid_argument("extract_views: non-positive lenslet spacing");
    if (params.num_views_u <= 0 || params.num_views_v <= 0 ||
        params.num_views_u % 2 == 0 || params.num_views_v % 2 == 0)
        throw std::invalid_argument("extract_views: view counts must be odd and positive");
    double du = grid.spacing_x / params.num_views_u;
    double dv = grid.spacing_y / params.num_views_v;
    if (du < 1.0 || dv < 1.0)
        throw std::invalid_argument(
            "extract_views: requested view count exceeds lenslet spacing (sub-pixel view pitch)");

    LightField out(params.num_views_u, params.num_views_v, grid.lens_cols,
                   grid.lens_rows);
    out.colour_space = ColorSpace::LinearRGB;
    int uc = out.centre_row(), vc = out.centre_col();
    double cr = std::cos(grid.rotation), sr = std::sin(grid.rotation);
    const Image* wi = params.interpolation == Interpolation::WiGuidedBicubic
                          ? &wi_norm
                          : nullptr;

    parallel_for(0, out.rows * out.cols, [&](int vi) {
        int u = vi / out.cols, v = vi % out.cols;
        double ox = (u - uc) * du, oy = (v - vc) * dv;
        double rx = cr * ox - sr * oy, ry = sr * ox + cr * oy;
        Image& dst = out.views[vi];
        for (int s = 0; s < grid.lens_rows; ++s) {
            for (int t = 0; t < grid.lens_cols; ++t) {
                double cx, cy;
                lenslet_centre(grid, s, t, cx, cy);
                float px[3];
                sample_bicubic(rgb, wi, cx + rx, cy + ry, params.epsilon_w, px);
                for (int c = 0; c < 3; ++c) dst.at(t, s, c) = px[c];
            }
        }
    });

    for (int u = 0; u < out.rows; ++u)
        for (int v = 0; v < out.cols; ++v)
            if (!(u == uc && v == vc) &&
                mean_luma(out.view(u, v)) < params.dark_view_luma_floor)
                out.set_valid(u, v, false);
    return out;
}

LightField decode(const PlenopticRaw& raw, const WhiteImage& wi,
                  const WhiteBalance& wb, const LensletGrid& grid,
                  const DecodeParams& params) {
    if (!raw.sensor.same_shape(wi.sensor))
        throw std::invalid_argument("decode: raw and white image shapes differ");
    if (raw.pattern != wi.pattern)
        throw std::invalid_argument("decode: raw and white image CFA patterns differ");
    Image wi_norm = normalize_white_image(wi, wb, params.wi_percentile);
    DevignetteResult dv = devignette(raw, wi_norm, params.epsilon_wi);
    Image rgb = demosaic(dv.image, raw.pattern);
    return extract_views(rgb, wi_norm, grid, params);
}

} // namespace lf::lenslet
