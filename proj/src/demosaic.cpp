#include "lf/lenslet.hpp"

#include <cmath>

#include "lf/parallel.hpp"

namespace lf::lenslet {

// Gradient-corrected bilinear interpolation. Each missing channel is a 5x5
// linear stencil around the pixel: bilinear average plus a scaled Laplacian
// of the channel present at the pixel. All stencils have unit DC gain and
// vanishing first moments, so affine signals are reproduced exactly.
Image demosaic(const Image& mosaic, BayerPattern pattern) {
    if (mosaic.channels != 1)
        throw std::invalid_argument("demosaic: 1-channel mosaic required");
    if (mosaic.width < 2 || mosaic.height < 2)
        throw std::invalid_argument("demosaic: image too small");
    const int w = mosaic.width, h = mosaic.height;
    Image out(w, h, 3);

    parallel_for(0, h, [&](int y) {
        auto m = [&](int x, int yy) -> double {
            return mosaic.at(mirror_index(x, w), mirror_index(yy, h), 0);
        };
        for (int x = 0; x < w; ++x) {
            double v = m(x, y);
            double n1 = m(x, y - 1), s1 = m(x, y + 1), e1 = m(x + 1, y), w1 = m(x - 1, y);
            double n2 = m(x, y - 2), s2 = m(x, y + 2), e2 = m(x + 2, y), w2 = m(x - 2, y);
            double ne = m(x + 1, y - 1), nw = m(x - 1, y - 1);
            double se = m(x + 1, y + 1), sw = m(x - 1, y + 1);

            int ch = channel_at(pattern, x, y);
            double r, g, b;
            if (ch == 1) {
                g = v;
                // Channel found to the left/right of this green pixel.
                bool red_row = channel_at(pattern, x + 1, y) == 0;
                double horiz =
                    (5.0 * v + 4.0 * (e1 + w1) - (ne + nw + se + sw) -
                     (e2 + w2) + 0.5 * (n2 + s2)) / 8.0;
                double vert =
                    (5.0 * v + 4.0 * (n1 + s1) - (ne + nw + se + sw) -
                     (n2 + s2) + 0.5 * (e2 + w2)) / 8.0;
                r = red_row ? horiz : vert;
                b = red_row ? vert : horiz;
            } else {
                double green =
                    (4.0 * v + 2.0 * (n1 + s1 + e1 + w1) - (n2 + s2 + e2 + w2)) / 8.0;
                double opposite =
                    (6.0 * v + 2.0 * (ne + nw + se + sw) -
                     1.5 * (n2 + s2 + e2 + w2)) / 8.0;
                g = green;
                if (ch == 0) {
                    r = v;
                    b = opposite;
                } else {
                    b = v;
                    r = opposite;
                }
            }
            out.at(x, y, 0) = static_cast<float>(std::clamp(r, 0.0, 1.0));
            out.at(x, y, 1) = static_cast<float>(std::clamp(g, 0.0, 1.0));
            out.at(x, y, 2) = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    });
    return out;
}

} // namespace lf::lenslet
