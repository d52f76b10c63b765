#pragma once

#include <string>
#include <vector>

#include "lf/image.hpp"
#include "lf/lightfield.hpp"

namespace lf::metrics {

//! Spatial CIELAB difference between two linear-RGB images: both are taken to
//! opponent space, each opponent channel is blurred with its contrast
//! sensitivity kernel (a unit-DC sum of Gaussians whose widths scale with the
//! viewing resolution), and the mean per-pixel Lab distance of the filtered
//! images is returned. Uniform images therefore score exactly their plain
//! Lab distance.
double scielab(const Image& a, const Image& b, double samples_per_degree = 23.0);

//! Mean over L, a, b of the symmetric chi-square distance between the two
//! images' normalized per-channel histograms (L binned over [0,100], a and b
//! over [-128,127]). Inputs are Lab images; the result lies in [0, 2].
double hist_chi2(const Image& lab_a, const Image& lab_b, int bins = 25);

//! Blind additive-white-Gaussian-noise level estimate on the image's
//! luminance: the minimum eigenvalue of the covariance of low-texture
//! patches, with the low-texture threshold re-derived from the current
//! estimate until the selection stabilises. Returns the std-dev in the
//! image's normalized units; a constant image yields 0.
double estimate_noise(const Image& img, int patch_size = 7);

struct ViewMetrics {
    int u = 0;
    int v = 0;
    bool is_centre = false;
    double scielab = 0.0;   //!< mean spatial-Lab distance to the centre view
    double hist_chi2 = 0.0; //!< Lab histogram distance to the centre view
    double noise_sigma = 0.0;
};

struct MetricReport {
    std::vector<ViewMetrics> per_view; //!< valid views in row-major order
    double mean_scielab = 0.0;     //!< mean over valid non-centre views
    double mean_hist_chi2 = 0.0;   //!< mean over valid non-centre views
    double mean_noise_sigma = 0.0; //!< mean over all valid views
};

struct MetricConfig {
    double samples_per_degree = 23.0;
    int hist_bins = 25;
    int noise_patch = 7;
};

//! Score every valid view of a decoded (linear RGB) light field against its
//! centre view and estimate each view's noise level. Distance aggregates
//! exclude the centre's self-comparison; the noise aggregate includes it.
MetricReport lightfield_report(const LightField& lf, const MetricConfig& cfg = {});

//! Human-readable table, one row per view plus an aggregate line.
std::string format_report(const MetricReport& report);

//! Machine-readable CSV with a header row; aggregates appended as a final
//! row with u = v = -1.
std::string report_csv(const MetricReport& report);

} // namespace lf::metrics
