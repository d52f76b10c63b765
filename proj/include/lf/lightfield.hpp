#pragma once

#include <string>
#include <vector>

#include "lf/color.hpp"
#include "lf/image.hpp"

namespace lf {

//! 4D light field stored as a row-major grid of sub-aperture views.
//! Grid index u is the view row, v the view column; row 0 is the top.
struct LightField {
    int rows = 0; //!< number of view rows (U)
    int cols = 0; //!< number of view columns (V)
    std::vector<Image> views; //!< rows*cols, row-major
    std::vector<uint8_t> valid; //!< rows*cols, row-major
    ColorSpace colour_space = ColorSpace::LinearRGB;
    Xyz white_point = kD65;

    LightField() = default;
    LightField(int u, int v, int width, int height, int channels = 3);

    int centre_row() const { return rows / 2; }
    int centre_col() const { return cols / 2; }
    int view_index(int u, int v) const { return u * cols + v; }

    Image& view(int u, int v) { return views[view_index(u, v)]; }
    const Image& view(int u, int v) const { return views[view_index(u, v)]; }
    Image& centre_view() { return view(centre_row(), centre_col()); }
    const Image& centre_view() const { return view(centre_row(), centre_col()); }

    bool is_valid(int u, int v) const { return valid[view_index(u, v)] != 0; }
    void set_valid(int u, int v, bool ok) { valid[view_index(u, v)] = ok ? 1 : 0; }

    //! Throws unless all views share one shape and the centre view is valid.
    void check_consistent() const;
};

//! Directory layout: manifest.json plus one 16-bit PPM per valid view named
//! view_RR_CC.ppm (RR = row, CC = column, zero-padded, row 00 at the top).
//! Lab data is packed per channel as L/100, (a+128)/255, (b+128)/255.
//! `stage` is a free-form pipeline bookkeeping tag stored in the manifest.
void save_lightfield(const LightField& lf, const std::string& dir,
                     const std::string& stage = "");

struct LoadedLightField {
    LightField lf;
    std::string stage;
};

LoadedLightField load_lightfield(const std::string& dir);

//! PSNR in dB over all channels of two same-shape images (peak 1.0).
double psnr(const Image& a, const Image& b);

//! Mean PSNR over views valid in both fields; centre-only variant for tests.
double mean_view_psnr(const LightField& a, const LightField& b);

} // namespace lf
