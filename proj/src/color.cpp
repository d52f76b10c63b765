#include "lf/color.hpp"

#include <cmath>

namespace lf {

double srgb_encode_value(double v) {
    if (v <= 0.0031308) return 12.92 * v;
    return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_decode_value(double v) {
    if (v <= 0.04045) return v / 12.92;
    return std::pow((v + 0.055) / 1.055, 2.4);
}

// BT.709 primaries with D65 reference white.
static constexpr double kRgbToXyz[9] = {
    0.4124564, 0.3575761, 0.1804375,
    0.2126729, 0.7151522, 0.0721750,
    0.0193339, 0.1191920, 0.9503041,
};
static constexpr double kXyzToRgb[9] = {
     3.2404542, -1.5371385, -0.4985314,
    -0.9692660,  1.8760108,  0.0415560,
     0.0556434, -0.2040259,  1.0572252,
};

Xyz rgb_to_xyz(double r, double g, double b) {
    return {kRgbToXyz[0] * r + kRgbToXyz[1] * g + kRgbToXyz[2] * b,
            kRgbToXyz[3] * r + kRgbToXyz[4] * g + kRgbToXyz[5] * b,
            kRgbToXyz[6] * r + kRgbToXyz[7] * g + kRgbToXyz[8] * b};
}

void xyz_to_rgb(const Xyz& c, double& r, double& g, double& b) {
    r = kXyzToRgb[0] * c.x + kXyzToRgb[1] * c.y + kXyzToRgb[2] * c.z;
    g = kXyzToRgb[3] * c.x + kXyzToRgb[4] * c.y + kXyzToRgb[5] * c.z;
    b = kXyzToRgb[6] * c.x + kXyzToRgb[7] * c.y + kXyzToRgb[8] * c.z;
}

static double lab_f(double t) {
    constexpr double d = 6.0 / 29.0;
    if (t > d * d * d) return std::cbrt(t);
    return t / (3.0 * d * d) + 4.0 / 29.0;
}

static double lab_f_inv(double t) {
    constexpr double d = 6.0 / 29.0;
    if (t > d) return t * t * t;
    return 3.0 * d * d * (t - 4.0 / 29.0);
}

static void check_white(const Xyz& w) {
    if (w.x <= 0 || w.y <= 0 || w.z <= 0)
        throw std::invalid_argument("white point must be positive");
}

Lab xyz_to_lab(const Xyz& c, const Xyz& white) {
    check_white(white);
    double fx = lab_f(c.x / white.x);
    double fy = lab_f(c.y / white.y);
    double fz = lab_f(c.z / white.z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Xyz lab_to_xyz(const Lab& c, const Xyz& white) {
    check_white(white);
    double fy = (c.L + 16.0) / 116.0;
    double fx = fy + c.a / 500.0;
    double fz = fy - c.b / 200.0;
    return {white.x * lab_f_inv(fx), white.y * lab_f_inv(fy),
            white.z * lab_f_inv(fz)};
}

Lab rgb_to_lab_value(double r, double g, double b, const Xyz& white) {
    return xyz_to_lab(rgb_to_xyz(r, g, b), white);
}

bool lab_to_rgb_value(const Lab& c, double& r, double& g, double& b,
                      const Xyz& white) {
    xyz_to_rgb(lab_to_xyz(c, white), r, g, b);
    bool clipped = false;
    for (double* v : {&r, &g, &b}) {
        if (*v < 0.0 || *v > 1.0) {
            *v = std::clamp(*v, 0.0, 1.0);
            clipped = true;
        }
    }
    return clipped;
}

static void require_rgb(const Image& img, const char* op) {
    if (img.channels != 3)
        throw std::invalid_argument(std::string(op) + ": expected 3 channels");
}

Image srgb_encode(const Image& linear) {
    require_rgb(linear, "srgb_encode");
    Image out = linear;
    for (float& v : out.data)
        v = static_cast<float>(srgb_encode_value(std::clamp<double>(v, 0.0, 1.0)));
    return out;
}

Image srgb_decode(const Image& encoded) {
    require_rgb(encoded, "srgb_decode");
    Image out = encoded;
    for (float& v : out.data)
        v = static_cast<float>(srgb_decode_value(std::clamp<double>(v, 0.0, 1.0)));
    return out;
}

Image rgb_to_lab(const Image& linear, const Xyz& white) {
    require_rgb(linear, "rgb_to_lab");
    Image out(linear.width, linear.height, 3);
    for (size_t i = 0; i < out.data.size(); i += 3) {
        Lab lab = rgb_to_lab_value(linear.data[i], linear.data[i + 1],
                                   linear.data[i + 2], white);
        out.data[i] = static_cast<float>(lab.L);
        out.data[i + 1] = static_cast<float>(lab.a);
        out.data[i + 2] = static_cast<float>(lab.b);
    }
    return out;
}

Image lab_to_rgb(const Image& lab, const Xyz& white, GamutStats* stats) {
    require_rgb(lab, "lab_to_rgb");
    Image out(lab.width, lab.height, 3);
    long clipped = 0;
    for (size_t i = 0; i < out.data.size(); i += 3) {
        double r, g, b;
        if (lab_to_rgb_value({lab.data[i], lab.data[i + 1], lab.data[i + 2]}, r,
                             g, b, white))
            ++clipped;
        out.data[i] = static_cast<float>(r);
        out.data[i + 1] = static_cast<float>(g);
        out.data[i + 2] = static_cast<float>(b);
    }
    if (stats) stats->clipped += clipped;
    return out;
}

double mean_luma(const Image& linear) {
    require_rgb(linear, "mean_luma");
    double acc = 0;
    for (size_t i = 0; i < linear.data.size(); i += 3)
        acc += luma709(linear.data[i], linear.data[i + 1], linear.data[i + 2]);
    return acc / (static_cast<double>(linear.width) * linear.height);
}

} // namespace lf
