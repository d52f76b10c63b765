#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lf/correspond.hpp"
#include "lf/lightfield.hpp"
#include "lf/transfer.hpp"

namespace lf::propagate {

//! How palette views are chosen while correcting a light field:
//! Centre recolours every view directly against the centre view; Prop walks
//! outward, each view matched against its already-corrected inner neighbour;
//! PropCentre combines both palettes in a single fit.
enum class Scheme { Centre, Prop, PropCentre };

struct PaletteRef {
    int u = 0;
    int v = 0;
    bool corrected = false; //!< read after earlier steps rewrote it (never the centre)
};

struct PlanStep {
    int target_u = 0;
    int target_v = 0;
    std::vector<PaletteRef> palettes; //!< one entry, or two for PropCentre
    int depth = 0; //!< dependency depth; equal depths may run concurrently
};

struct RecolourPlan {
    int rows = 0;
    int cols = 0;
    Scheme scheme = Scheme::Centre;
    std::vector<PlanStep> steps; //!< dependency-respecting execution order
};

//! Deterministic correction order over a rows x cols view grid: the centre
//! column outward from the centre (up before down), then each row outward
//! from its centre-column seed (centre row first, then rows by distance, up
//! before down; left before right within a row). Invalid views are skipped as
//! targets, and palettes walk further inward past invalid views. Throws if
//! the centre view is invalid or the mask does not match the grid.
RecolourPlan build_plan(int rows, int cols, const std::vector<uint8_t>& valid_mask,
                        Scheme scheme);

//! One line per step, inspection-friendly: "(u,v) <- (u',v')* (uc,vc) [depth d]"
//! where the star marks palettes read in their corrected state.
std::string format_plan(const RecolourPlan& plan);

struct ViewTransform {
    int u = 0;
    int v = 0;
    transfer::TpsTransform tps;
};

struct PropagationConfig {
    Scheme scheme = Scheme::Prop;
    transfer::TransferConfig transfer;
    correspond::PatchMatchConfig match;
    int min_pairs = correspond::CorrespondenceSet::kMinPairs;
};

struct RecolourResult {
    LightField lf;
    std::vector<ViewTransform> transforms; //!< per corrected view, plan order
    std::vector<std::pair<int, int>> failed; //!< views invalidated for lack of matches
};

//! Execute the plan for `cfg.scheme` over a decoded linear-RGB light field:
//! per step, match the target against its palette view(s), fit a colour
//! transform and rewrite the target before later steps read it. The centre
//! view is returned bit-identical. Views with too few coherent matches are
//! marked invalid and skipped by later palette lookups instead of aborting.
//! Steps of equal dependency depth run in parallel; results do not depend on
//! the worker count.
RecolourResult recolour_lightfield(const LightField& lf,
                                   const PropagationConfig& cfg = {});

} // namespace lf::propagate
