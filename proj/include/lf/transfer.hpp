#pragma once

#include "lf/color.hpp"
#include "lf/correspond.hpp"
#include "lf/image.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace lf::transfer {

//! Global colour mapping in LAB: affine part plus a thin-plate spline
//! correction anchored at fixed control colours,
//!     phi(c) = A*c + t + sum_i W_i * k(||c - control_i||),  k(r) = -r.
//! Well-posed instances keep W orthogonal to the polynomial part:
//! sum_i W_i = 0 and sum_i W_i * control_i^T = 0.
struct TpsTransform {
    std::vector<Lab> control_points;
    std::vector<std::array<double, 3>> weights; //!< one W_i row per control
    std::array<std::array<double, 3>, 3> affine{
        {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    std::array<double, 3> translation{0, 0, 0};
};

//! Gradient of the registration cost, laid out like the parameters.
struct TpsGradient {
    std::vector<std::array<double, 3>> weights;
    std::array<std::array<double, 3>, 3> affine{};
    std::array<double, 3> translation{};
};

struct TransferConfig {
    //! Annealing bandwidths in LAB units, strictly decreasing.
    std::vector<double> h_schedule{20.0, 10.0, 5.0, 2.0};
    int inner_iters = 50;              //!< descent steps per bandwidth stage
    std::array<int, 3> control_grid{6, 6, 6}; //!< lattice counts per LAB axis
    double lambda_reg = 1e-3;          //!< spline bending-energy weight
};

//! Cost per bandwidth stage, first entry the cost before the first step.
struct FitTrace {
    std::vector<std::vector<double>> stage_costs;
};

Lab tps_apply(const TpsTransform& tps, const Lab& c);

//! Gaussian-mixture registration cost of the transformed target colours
//! against the palette colours,
//!     C = -sum_k (1/n^2) N(0; phi(c_t_k) - c_p_k, 2 h^2 I)
//!         + lambda_reg * trace(W^T K W),
//! with N the 3D isotropic Gaussian density and K the kernel matrix over the
//! control points. Throws std::invalid_argument for empty sets, h <= 0, or a
//! weight/control count mismatch.
double gmm_cost(const TpsTransform& tps,
                const correspond::CorrespondenceSet& corr, double h,
                double lambda_reg = 0.0);

//! Exact analytic gradient of gmm_cost with respect to (W, A, t).
TpsGradient gmm_cost_gradient(const TpsTransform& tps,
                              const correspond::CorrespondenceSet& corr,
                              double h, double lambda_reg = 0.0);

//! Fits the colour mapping by annealed gradient descent: control points on a
//! `control_grid` lattice spanning the observed colours, identity start, one
//! descent stage per bandwidth with an adaptive-step line search (monotone
//! non-increasing cost per stage), and projection of W onto the orthogonality
//! conditions at every step. Internally the fit runs in a centred/rescaled
//! colour frame for conditioning; the returned transform is in plain LAB.
//! Throws std::invalid_argument for insufficient correspondences (fewer than
//! CorrespondenceSet::kMinPairs) or an invalid configuration.
TpsTransform fit_transfer(const correspond::CorrespondenceSet& corr,
                          const TransferConfig& cfg = {},
                          FitTrace* trace = nullptr);

//! Applies the mapping to a linear-RGB image via LAB: transform values are
//! looked up on a 33^3 lattice over the LAB cube (exact at lattice nodes)
//! with trilinear interpolation in between. Out-of-gamut results are clipped
//! and counted into `stats` when given.
Image recolour_image(const Image& linear_rgb, const TpsTransform& tps,
                     GamutStats* stats = nullptr);

//! Text round trip for caching and debugging.
void save_transfer(std::ostream& os, const TpsTransform& tps);
TpsTransform load_transfer(std::istream& is);

} // namespace lf::transfer
