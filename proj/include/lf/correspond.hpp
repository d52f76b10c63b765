#pragma once

#include "lf/color.hpp"
#include "lf/image.hpp"

#include <cstdint>
#include <vector>

namespace lf::correspond {

//! One sparse match: a pixel position in the target image, the matched
//! position in the palette image, and the 3x3-mean colours around both
//! endpoints expressed in LAB.
struct Correspondence {
    double tx = 0, ty = 0; //!< target position (pixels)
    double px = 0, py = 0; //!< matched palette position (pixels)
    Lab c_t;               //!< target colour, 3x3 mean around (tx, ty)
    Lab c_p;               //!< palette colour, 3x3 mean around (px, py)
};

struct CorrespondenceSet {
    int width = 0;  //!< target width the positions refer to
    int height = 0; //!< target height
    std::vector<Correspondence> pairs;

    int n() const { return static_cast<int>(pairs.size()); }

    //! Sets smaller than this are too thin to support a colour-transfer fit.
    static constexpr int kMinPairs = 50;
    bool sufficient(int n_min = kMinPairs) const { return n() >= n_min; }
};

struct PatchMatchConfig {
    int seed_stride = 8;   //!< seed grid pitch in full-resolution pixels
    int patch_radius = 4;  //!< SAD window is (2*radius+1)^2
    int levels = 3;        //!< pyramid depth, factor 2 per level
    double search_radius = 16.0; //!< random-search radius, full-res pixels
    double fb_threshold = 2.0;   //!< forward-backward round-trip limit, pixels
    uint64_t seed = 0x51eed5;    //!< RNG stream; fixed seed -> identical output
};

//! Sparse correspondences between two same-sized 3-channel linear-RGB views.
//!
//! Coarse-to-fine patch matching: box pyramids (factor 2), a seed grid at
//! `seed_stride`, random initialisation within `search_radius` at the coarsest
//! level, then per level several sweeps of 4-neighbour propagation plus
//! exponentially shrinking random search minimising the sum of absolute
//! differences over (2*patch_radius+1)^2 windows, doubling displacements at
//! each level change. A forward-backward consistency pass discards seeds whose
//! round trip misses by more than `fb_threshold` pixels or leaves the image.
//!
//! The target is gain-normalised (scaled so its mean luminance matches the
//! palette's) before matching so that dark views still match on structure;
//! reported target colours come from the original, unscaled pixels.
//!
//! Throws std::invalid_argument on dimension/channel mismatch or when the
//! images are too small for the requested pyramid depth.
CorrespondenceSet patch_match(const Image& target, const Image& palette,
                              const PatchMatchConfig& cfg = {});

//! Concatenates two correspondence sets over the same target geometry.
//! Throws std::invalid_argument if the target dimensions differ.
CorrespondenceSet merge_correspondences(const CorrespondenceSet& a,
                                        const CorrespondenceSet& b);

} // namespace lf::correspond
