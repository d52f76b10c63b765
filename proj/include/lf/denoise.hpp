#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lf/image.hpp"
#include "lf/lightfield.hpp"

namespace lf::denoise {

enum class Stage { HardOnly, HardPlusWiener };

struct DenoiseParams {
    int patch_size = 8;      //!< P, power of two
    int angular_window = 5;  //!< views per axis in one processing window
    int num_similar = 8;     //!< stack depth N_s, power of two
    int search_radius = 16;  //!< self-similarity search radius, pixels
    double disparity_range = 2.0; //!< scalar disparity searched over +/- this
    double disparity_step = 0.5;
    double hard_threshold = 2.7; //!< coefficient threshold as a multiple of sigma
    double sigma = 0.0;          //!< noise std-dev; 0 means no-op
    Stage stage = Stage::HardOnly;
};

//! Contiguous rectangle of views [u0, u0+nu) x [v0, v0+nv) with the reference
//! view (centre_u, centre_v) inside it, in absolute view coordinates.
struct AngularWindow {
    int u0 = 0, v0 = 0;
    int nu = 1, nv = 1;
    int centre_u = 0, centre_v = 0;
};

//! One disparity-compensated patch across a window of views, single channel;
//! data laid out as [view_u][view_v][py][px].
struct Patch4D {
    int nu = 0, nv = 0, patch = 0;
    std::vector<double> data;

    double& at(int u, int v, int py, int px) {
        return data[((static_cast<size_t>(u) * nv + v) * patch + py) * patch + px];
    }
    double at(int u, int v, int py, int px) const {
        return data[((static_cast<size_t>(u) * nv + v) * patch + py) * patch + px];
    }
};

//! A stack of similar 4D patches, single channel; data laid out as
//! [similar][view_u][view_v][py][px]. All member patches share the window and
//! the scalar disparity, so each view's offset is disparity * (view - centre).
struct PatchStack5D {
    int num = 0; //!< stack depth (number of similar patches)
    int nu = 0, nv = 0, patch = 0;
    double disparity = 0.0;
    AngularWindow window;
    std::vector<std::pair<int, int>> origins; //!< per similar patch, centre-view x,y
    std::vector<double> data;

    size_t size() const {
        return static_cast<size_t>(num) * nu * nv * patch * patch;
    }
    double& at(int s, int u, int v, int py, int px) {
        return data[(((static_cast<size_t>(s) * nu + u) * nv + v) * patch + py) * patch + px];
    }
    double at(int s, int u, int v, int py, int px) const {
        return data[(((static_cast<size_t>(s) * nu + u) * nv + v) * patch + py) * patch + px];
    }
};

//! Extract the patch at `ref` from every view in the window, shifting each
//! view's sampling position by disparity * (view index - centre index) with
//! bilinear sub-pixel access on `channel`. Throws if any compensated patch
//! leaves its view; callers shrink the window first (see shrink_window).
Patch4D build_4d_patch(const LightField& lf, const AngularWindow& win, int channel,
                       std::pair<int, int> ref, int patch_size, double disparity);

//! Largest view rectangle inside `win`, containing its centre, whose
//! compensated patches all stay inside width x height view bounds.
AngularWindow shrink_window(const AngularWindow& win, std::pair<int, int> ref,
                            int patch_size, double disparity, int width, int height);

//! Scalar disparity in [-range, +range] minimizing the mean absolute
//! difference between each compensated view patch and the centre patch on
//! `channel`; candidates are tried nearest-zero first, so ties resolve
//! toward zero.
double select_disparity(const LightField& lf, const AngularWindow& win, int channel,
                        std::pair<int, int> ref, int patch_size,
                        const DenoiseParams& params);

//! The `num` patch positions in `view` most similar to the patch at `ref`
//! under squared distance on `channel`, searched exhaustively within
//! `radius`; the reference itself is always first and remaining ties break in
//! row-major scan order.
std::vector<std::pair<int, int>> find_similar(const Image& view, int channel,
                                              std::pair<int, int> ref, int patch_size,
                                              int num, int radius);

//! Orthonormal analysis cascade: 2D DCT over each patch, 2D DCT across the
//! view axes, then a 1D Haar transform along the stack. cascade_inverse
//! applies the exact adjoints in reverse, writing into stack.data.
std::vector<double> cascade_forward(const PatchStack5D& stack);
void cascade_inverse(std::vector<double> coef, PatchStack5D& stack);

struct FilterOutcome {
    PatchStack5D stack;
    double weight = 0.0; //!< aggregation weight 1 / (1 + retained * sigma^2)
    long retained = 0;   //!< nonzero coefficients kept
};

//! Hard-threshold collaborative filter: zero every cascade coefficient with
//! magnitude below lambda_t * sigma except the all-DC coefficient, then
//! invert the cascade.
FilterOutcome filter_stack(const PatchStack5D& stack, double sigma, double lambda_t);

//! Collaborative 5D filter over the whole light field: per reference patch on
//! a half-patch stride grid of each window's centre view, stack similar
//! disparity-compensated 4D patches, filter them in a luminance-chrominance
//! opponent space with per-channel noise scaling, and aggregate the weighted
//! overlaps. Grids larger than the angular window are processed in window
//! sized tiles. Invalid views pass through untouched; sigma = 0 returns the
//! input unchanged; sigma < 0 is an error.
LightField denoise_lightfield(const LightField& lf, const DenoiseParams& params);

} // namespace lf::denoise
