#pragma once

#include <cstdint>

#include "lf/lenslet.hpp"
#include "lf/lightfield.hpp"

namespace lf::sim {

enum class SceneKind { FlatGrey, SmoothGradient, TexturedDisparity, ColorChart };

struct SimParams {
    lenslet::LensletGrid grid;
    lenslet::BayerPattern pattern = lenslet::BayerPattern::RGGB;
    lenslet::WhiteBalance wb_gains_applied; //!< gains the decoder is expected to apply
    double vignette_sigma = 0.35; //!< Gaussian spread as a fraction of the micro-image radius
    double noise_sigma = 0.0; //!< AWGN std-dev added to the raw capture
    int hot_pixel_count = 0; //!< defective white-image pixels stuck at 10.0
    uint64_t seed = 1;
};

//! Deterministic procedural light field; every view is the centre view
//! translated by (disparity*(v-vc), disparity*(u-uc)) pixels, evaluated
//! analytically so there is no resampling error.
LightField synth_lightfield(SceneKind kind, int views_u, int views_v, int width,
                            int height, double disparity = 0.0);

//! Flat-field capture for the grid in `params`: peak 0.95 at micro-lens
//! centres falling off as a Gaussian of the distance to the centre, with
//! red/blue CFA sites divided by the applied white-balance gains so that the
//! decoder's gain multiplication cancels exactly. Optional hot pixels at 10.0.
lenslet::WhiteImage synth_white_image(const SimParams& params, int width, int height);

//! Pinhole-per-lenslet capture of `lf`: each sensor pixel finds its owning
//! lenslet, converts its offset from the lenslet centre into fractional view
//! coordinates, samples the light field bilinearly in (u,v) at the lenslet's
//! spatial position, applies the vignetting profile and the CFA, then adds
//! noise. Samples are clipped to [0,1]; black level 0, saturation level 1.
lenslet::PlenopticRaw simulate_raw(const LightField& lf, const SimParams& params,
                                   int width, int height);

//! The 24-entry flat-patch palette used by SceneKind::ColorChart.
extern const float kChartColors[24][3];

} // namespace lf::sim
