#pragma once

#include "lf/image.hpp"

namespace lf {

//! CIE XYZ triple; also used for white points (Y normalised to 1).
struct Xyz {
    double x = 0, y = 0, z = 0;
};

//! CIE L*a*b* colour. L in [0,100] nominally, a/b roughly [-128,127].
struct Lab {
    double L = 0, a = 0, b = 0;
};

inline constexpr Xyz kD65{0.95047, 1.0, 1.08883};

// ---- scalar transfer curves -------------------------------------------------

//! Linear -> gamma-companded value (two-piece curve, knee at 0.0031308).
double srgb_encode_value(double v);
//! Gamma-companded -> linear value (knee at 0.04045).
double srgb_decode_value(double v);

// ---- scalar colour conversions (BT.709 primaries, configurable white) ------

Xyz rgb_to_xyz(double r, double g, double b);
void xyz_to_rgb(const Xyz& c, double& r, double& g, double& b);
Lab xyz_to_lab(const Xyz& c, const Xyz& white = kD65);
Xyz lab_to_xyz(const Lab& c, const Xyz& white = kD65);
Lab rgb_to_lab_value(double r, double g, double b, const Xyz& white = kD65);
//! Returns true if the result had to be clipped into [0,1].
bool lab_to_rgb_value(const Lab& c, double& r, double& g, double& b,
                      const Xyz& white = kD65);

// ---- whole-image conversions ------------------------------------------------

Image srgb_encode(const Image& linear);
Image srgb_decode(const Image& encoded);

Image rgb_to_lab(const Image& linear, const Xyz& white = kD65);

struct GamutStats {
    long clipped = 0; //!< samples clipped into [0,1] on conversion
};

Image lab_to_rgb(const Image& lab, const Xyz& white = kD65,
                 GamutStats* stats = nullptr);

//! BT.709 luma of a linear-RGB pixel.
inline double luma709(double r, double g, double b) {
    return 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
}

//! Mean BT.709 luma over a linear-RGB image.
double mean_luma(const Image& linear);

} // namespace lf
