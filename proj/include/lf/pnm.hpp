#pragma once

#include <string>

#include "lf/image.hpp"

namespace lf {

//! Write a 16-bit big-endian binary PGM (1 channel) or PPM (3 channels).
//! Samples are clamped to [0,1] and quantised with round(v * 65535).
//! An optional scale divides samples before quantisation so data above 1.0
//! (e.g. hot sensor pixels) survives a round trip; pass the same scale to read.
void write_pnm16(const std::string& path, const Image& img, double scale = 1.0);

//! Read a 16-bit binary PGM/PPM written by write_pnm16 (or any maxval-65535
//! P5/P6 file). Returns samples in [0,1] * scale.
Image read_pnm16(const std::string& path, double scale = 1.0);

} // namespace lf
