#include "lf/sim.hpp"

#include <cmath>

#include "lf/rng.hpp"

namespace lf::sim {

using lenslet::LensletGrid;

static constexpr double kTau = 6.283185307179586;

const float kChartColors[24][3] = {
    {0.447f, 0.317f, 0.265f}, {0.764f, 0.580f, 0.501f},
    {0.364f, 0.480f, 0.612f}, {0.355f, 0.422f, 0.253f},
    {0.509f, 0.501f, 0.691f}, {0.386f, 0.749f, 0.670f},
    {0.867f, 0.481f, 0.187f}, {0.287f, 0.356f, 0.668f},
    {0.754f, 0.342f, 0.385f}, {0.361f, 0.226f, 0.417f},
    {0.629f, 0.742f, 0.242f}, {0.895f, 0.630f, 0.162f},
    {0.155f, 0.246f, 0.576f}, {0.277f, 0.588f, 0.284f},
    {0.681f, 0.199f, 0.223f}, {0.928f, 0.777f, 0.077f},
    {0.738f, 0.329f, 0.594f}, {0.166f, 0.529f, 0.655f},
    {0.945f, 0.948f, 0.923f}, {0.789f, 0.793f, 0.788f},
    {0.632f, 0.640f, 0.640f}, {0.473f, 0.475f, 0.477f},
    {0.324f, 0.330f, 0.331f}, {0.194f, 0.194f, 0.196f},
};

static float scene_sample(SceneKind kind, double x, double y, int c, int width,
                          int height) {
    switch (kind) {
        case SceneKind::FlatGrey:
            return 0.5f;
        case SceneKind::SmoothGradient: {
            double fx = x / std::max(1, width - 1);
            double fy = y / std::max(1, height - 1);
            double v[3] = {0.25 + 0.45 * fx + 0.10 * fy,
                           0.30 + 0.40 * fy,
                           0.55 - 0.20 * fx + 0.15 * fy};
            return static_cast<float>(std::clamp(v[c], 0.02, 0.98));
        }
        case SceneKind::TexturedDisparity: {
            static constexpr double off[3][2] = {{0.0, 0.0}, {3.1, 1.7}, {-2.3, 4.1}};
            double px = x + off[c][0], py = y + off[c][1];
            double f = 0.18 * std::sin(kTau * px / 16.7 +
                                       1.3 * std::sin(kTau * py / 29.0)) +
                       0.12 * std::sin(kTau * (px + py) / 23.3) +
                       0.08 * std::sin(kTau * py / 12.9 -
                                       0.9 * std::sin(kTau * px / 35.7));
            return static_cast<float>(std::clamp(0.5 + f, 0.05, 0.95));
        }
        case SceneKind::ColorChart: {
            int col = std::clamp(static_cast<int>(std::floor(x / (width / 6.0))), 0, 5);
            int row = std::clamp(static_cast<int>(std::floor(y / (height / 4.0))), 0, 3);
            return kChartColors[row * 6 + col][c];
        }
    }
    return 0.0f;
}

LightField synth_lightfield(SceneKind kind, int views_u, int views_v, int width,
                            int height, double disparity) {
    if (views_u <= 0 || views_v <= 0 || views_u % 2 == 0 || views_v % 2 == 0)
        throw std::invalid_argument("synth_lightfield: view counts must be odd and positive");
    if (std::abs(disparity) * std::max(views_u, views_v) >= width / 4.0)
        throw std::invalid_argument("synth_lightfield: disparity too large for the spatial size");
    LightField lf(views_u, views_v, width, height, 3);
    int uc = lf.centre_row(), vc = lf.centre_col();
    for (int u = 0; u < views_u; ++u) {
        for (int v = 0; v < views_v; ++v) {
            double dx = disparity * (v - vc), dy = disparity * (u - uc);
            Image& img = lf.view(u, v);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(x, y, c) =
                            scene_sample(kind, x - dx, y - dy, c, width, height);
        }
    }
    return lf;
}

//! Owning lenslet of an unrotated grid-frame position; dx/dy is the offset
//! from its centre. Checks neighbouring rows so hex row shifts stay correct.
static void owning_lenslet(const LensletGrid& g, double qx, double qy, int& s,
                           int& t, double& dx, double& dy) {
    int s0 = static_cast<int>(std::lround(qy / g.spacing_y));
    double best = 1e30;
    for (int ds = -1; ds <= 1; ++ds) {
        int sc = std::clamp(s0 + ds, 0, g.lens_rows - 1);
        double shift = (g.layout == lenslet::LensletLayout::HexRowOffset && (sc & 1))
                           ? g.spacing_x * 0.5
                           : 0.0;
        int tc = std::clamp(
            static_cast<int>(std::lround((qx - shift) / g.spacing_x)), 0,
            g.lens_cols - 1);
        double cx = tc * g.spacing_x + shift, cy = sc * g.spacing_y;
        double d2 = (qx - cx) * (qx - cx) + (qy - cy) * (qy - cy);
        if (d2 < best) {
            best = d2;
            s = sc;
            t = tc;
            dx = qx - cx;
            dy = qy - cy;
        }
    }
}

static void unrotate(const LensletGrid& g, double cr, double sr, double px,
                     double py, double& qx, double& qy) {
    double x = px - g.offset_x, y = py - g.offset_y;
    qx = cr * x + sr * y;
    qy = -sr * x + cr * y;
}

static double vignette_sigma_px(const SimParams& p) {
    double radius = std::min(p.grid.spacing_x, p.grid.spacing_y) * 0.5;
    return p.vignette_sigma * radius;
}

lenslet::WhiteImage synth_white_image(const SimParams& params, int width,
                                      int height) {
    const LensletGrid& g = params.grid;
    if (g.lens_rows <= 0 || g.lens_cols <= 0)
        throw std::invalid_argument("synth_white_image: empty lenslet grid");
    if (params.vignette_sigma <= 0)
        throw std::invalid_argument("synth_white_image: vignette sigma must be positive");
    lenslet::WhiteImage wi;
    wi.pattern = params.pattern;
    wi.sensor = Image(width, height, 1);
    double sig = vignette_sigma_px(params);
    double cr = std::cos(g.rotation), sr = std::sin(g.rotation);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double qx, qy, dx, dy;
            int s, t;
            unrotate(g, cr, sr, x, y, qx, qy);
            owning_lenslet(g, qx, qy, s, t, dx, dy);
            double fall = std::exp(-(dx * dx + dy * dy) / (2.0 * sig * sig));
            double gain = 1.0;
            int ch = lenslet::channel_at(params.pattern, x, y);
            if (ch == 0) gain = 1.0 / params.wb_gains_applied.r;
            if (ch == 2) gain = 1.0 / params.wb_gains_applied.b;
            wi.sensor.at(x, y, 0) = static_cast<float>(0.95 * gain * fall);
        }
    }
    if (params.hot_pixel_count > 0) {
        Rng rng = Rng(params.seed).fork(0x57a7);
        int placed = 0;
        while (placed < params.hot_pixel_count) {
            int x = rng.uniform_int(0, width - 1);
            int y = rng.uniform_int(0, height - 1);
            if (wi.sensor.at(x, y, 0) == 10.0f) continue;
            wi.sensor.at(x, y, 0) = 10.0f;
            ++placed;
        }
    }
    return wi;
}

lenslet::PlenopticRaw simulate_raw(const LightField& lf, const SimParams& params,
                                   int width, int height) {
    lf.check_consistent();
    if (lf.rows < 2 || lf.cols < 2)
        throw std::invalid_argument("simulate_raw: angular extent must be at least 2x2");
    if (lf.colour_space != ColorSpace::LinearRGB)
        throw std::invalid_argument("simulate_raw: light field must be linear RGB");
    for (uint8_t ok : lf.valid)
        if (!ok) throw std::invalid_argument("simulate_raw: all views must be valid");
    const LensletGrid& g = params.grid;
    if (g.lens_rows != lf.view(0, 0).height || g.lens_cols != lf.view(0, 0).width)
        throw std::invalid_argument("simulate_raw: grid does not match the spatial size");
    double du = g.spacing_x / lf.rows, dv = g.spacing_y / lf.cols;
    if (du < 1.0 || dv < 1.0)
        throw std::invalid_argument("simulate_raw: more views than the lenslet spacing supports");

    lenslet::PlenopticRaw raw;
    raw.pattern = params.pattern;
    raw.black_level = 0.0;
    raw.saturation_level = 1.0;
    raw.sensor = Image(width, height, 1);
    double sig = vignette_sigma_px(params);
    double cr = std::cos(g.rotation), sr = std::sin(g.rotation);
    int uc = lf.centre_row(), vc = lf.centre_col();
    Rng noise = Rng(params.seed).fork(0x5e0);

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double qx, qy, dx, dy;
            int s, t;
            unrotate(g, cr, sr, x, y, qx, qy);
            owning_lenslet(g, qx, qy, s, t, dx, dy);
            double uf = std::clamp(uc + dx / du, 0.0, lf.rows - 1.0);
            double vf = std::clamp(vc + dy / dv, 0.0, lf.cols - 1.0);
            int u0 = std::min(static_cast<int>(uf), lf.rows - 1);
            int v0 = std::min(static_cast<int>(vf), lf.cols - 1);
            int u1 = std::min(u0 + 1, lf.rows - 1);
            int v1 = std::min(v0 + 1, lf.cols - 1);
            double au = uf - u0, av = vf - v0;
            int ch = lenslet::channel_at(params.pattern, x, y);
            double val =
                (1 - au) * ((1 - av) * lf.view(u0, v0).at(t, s, ch) +
                            av * lf.view(u0, v1).at(t, s, ch)) +
                au * ((1 - av) * lf.view(u1, v0).at(t, s, ch) +
                      av * lf.view(u1, v1).at(t, s, ch));
            double fall = std::exp(-(dx * dx + dy * dy) / (2.0 * sig * sig));
            double v = val * fall;
            if (params.noise_sigma > 0) v += params.noise_sigma * noise.normal();
            raw.sensor.at(x, y, 0) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return raw;
}

} // namespace lf::sim
