#pragma once

#include <vector>

#include "lf/image.hpp"
#include "lf/lightfield.hpp"

namespace lf::lenslet {

enum class BayerPattern { RGGB, GRBG, GBRG, BGGR };
enum class LensletLayout { Square, HexRowOffset };
enum class Interpolation { Bicubic, WiGuidedBicubic };

//! Per-channel white-balance gains; green is fixed at 1.
struct WhiteBalance {
    double r = 1.0;
    double b = 1.0;
};

//! Mosaiced sensor capture. `sensor` holds black-subtracted samples scaled to
//! [0,1]; the original levels are kept for reference.
struct PlenopticRaw {
    Image sensor; //!< 1 channel
    BayerPattern pattern = BayerPattern::RGGB;
    double black_level = 0.0;
    double saturation_level = 1.0;
};

//! Flat-field capture from the same sensor (same CFA layout as the raw).
struct WhiteImage {
    Image sensor; //!< 1 channel; may exceed 1.0 at hot pixels
    BayerPattern pattern = BayerPattern::RGGB;
};

//! Regular micro-lens grid model. Lenslet (s,t) sits at
//! offset + R(rotation) * (t*spacing_x + row_shift(s), s*spacing_y), where
//! row_shift is spacing_x/2 on odd rows for the hex layout and 0 otherwise.
struct LensletGrid {
    double spacing_x = 10.0;
    double spacing_y = 10.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    double rotation = 0.0; //!< radians, about the grid origin
    LensletLayout layout = LensletLayout::Square;
    int lens_rows = 0;
    int lens_cols = 0;
};

struct DecodeParams {
    int num_views_u = 5; //!< odd; view row count, offsets along grid x
    int num_views_v = 5; //!< odd; view column count, offsets along grid y
    Interpolation interpolation = Interpolation::WiGuidedBicubic;
    double wi_percentile = 0.999; //!< white-image normalisation quantile
    double epsilon_wi = 1e-3; //!< white-image floor below which samples are unusable
    double epsilon_w = 1e-6; //!< weight-sum floor for guided interpolation
    double dark_view_luma_floor = 0.02; //!< views darker than this are invalid
};

//! CFA channel at (x, y): 0 = red, 1 = green, 2 = blue.
int channel_at(BayerPattern p, int x, int y);

//! Sensor-plane centre of lenslet (s, t).
void lenslet_centre(const LensletGrid& g, int s, int t, double& cx, double& cy);

//! Linear-interpolation quantile of `values` at p in [0, 1] (p*(n-1) rank).
double quantile(std::vector<float> values, double p);

//! Apply white-balance gains to the red/blue CFA sites of the white image and
//! divide by its `percentile` quantile so a peak-response site maps to ~1.
//! Throws if the quantile is not strictly positive.
Image normalize_white_image(const WhiteImage& wi, const WhiteBalance& wb,
                            double percentile);

struct DevignetteResult {
    Image image; //!< 1 channel; raw / wi_norm, clipped to [0,1]
    std::vector<uint8_t> saturated; //!< result exceeded 1.0 and was clipped
    std::vector<uint8_t> unreliable; //!< wi_norm below epsilon_wi; output forced to 0
    long saturated_count = 0;
    long unreliable_count = 0;
};

//! Pixel-wise division of the raw mosaic by the normalised white image.
DevignetteResult devignette(const PlenopticRaw& raw, const Image& wi_norm,
                            double epsilon_wi = 1e-3);

//! Gradient-corrected bilinear CFA interpolation (5x5 stencils, unit DC gain,
//! mirrored borders). Input 1-channel mosaic, output linear RGB in [0,1].
Image demosaic(const Image& mosaic, BayerPattern pattern);

//! Slice the demosaiced sensor into sub-aperture views. View (u,v) samples at
//! lenslet_centre(s,t) + R(rotation)*((u-uc)*du, (v-vc)*dv) with
//! du = spacing_x/num_views_u, dv = spacing_y/num_views_v; Catmull-Rom taps,
//! optionally weighted by the normalised white image and renormalised.
//! Views whose mean luma falls below dark_view_luma_floor are marked invalid.
LightField extract_views(const Image& rgb, const Image& wi_norm,
                         const LensletGrid& grid, const DecodeParams& params);

//! Full decode: normalise white image, devignette, demosaic, extract views.
LightField decode(const PlenopticRaw& raw, const WhiteImage& wi,
                  const WhiteBalance& wb, const LensletGrid& grid,
                  const DecodeParams& params);

} // namespace lf::lenslet
