#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasereg/field.hpp"
#include "phasereg/grid.hpp"

namespace phasereg {

/// 8-bit image, row-major from the top row. channels is 1 (gray) or 3 (RGB).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t* at(int row, int col) { return &pixels[(static_cast<std::size_t>(row) * width + col) * channels]; }
    const std::uint8_t* at(int row, int col) const {
        return &pixels[(static_cast<std::size_t>(row) * width + col) * channels];
    }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Reads an 8-bit grayscale PNG or PGM (P2/P5), picked by the file's magic.
/// Colour images are rejected with a hint to convert them to grayscale.
/// Throws IoError.
Image read_gray_image(const std::string& path);

/// Nearest-neighbour resample to n x n, thresholded at 128 to {0, 1}.
/// Image row 0 is the top of the domain (x2 = +L); columns run along x1.
Field image_to_grid(const Image& img, int n);
Field load_image(const std::string& path, int n);

/// Writes PNG with fixed compression settings and no time chunk, so equal
/// images give equal bytes. Throws IoError.
void write_png(const std::string& path, const Image& img);
/// Binary PGM (gray images only).
void write_pgm(const std::string& path, const Image& img);

/// Grayscale render of a field clamped to [0, 1], `scale` pixels per node,
/// in the same orientation as load_image.
Image render_field(const Field& field, int scale = 1);

/// render_field in RGB with the marching-squares contour at `level` drawn on top.
Image render_frame(const Field& field, double level, const GridSpec& grid, int scale = 4);

/// Pixel-space position of a physical point in a render at `scale`.
struct PixelPoint {
    double col = 0.0;
    double row = 0.0;
};
PixelPoint to_pixel(double x1, double x2, const GridSpec& grid, int scale);

/// Binary n_pixels x n_pixels rasterisation of a union of discs on [-L, L]^2,
/// sampled at pixel centres; inside is white.
struct Disc {
    double x1 = 0.0;
    double x2 = 0.0;
    double radius = 0.0;
};
Image rasterize_discs(const std::vector<Disc>& discs, int n_pixels, double half_width);

}  // namespace phasereg
