#include "phasereg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "phasereg/errors.hpp"
#include "phasereg/registration.hpp"

namespace phasereg {
namespace {

constexpr std::uint8_t kContourRgb[3] = {255, 0, 255};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

[[noreturn]] void reject_colour(const std::string& path) {
    throw IoError("image '" + path + "' is a colour image; convert to grayscale (8-bit) first");
}

Image decode_png(const std::string& bytes, const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throw IoError("cannot decode PNG '" + path + "': " + png.message);
    if (png.format & PNG_FORMAT_FLAG_COLOR) {
        png_image_free(&png);
        reject_colour(path);
    }
    png.format = PNG_FORMAT_GRAY;
    Image img;
    img.width = static_cast<int>(png.width);
    img.height = static_cast<int>(png.height);
    img.pixels.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr))
        throw IoError("cannot decode PNG '" + path + "': " + png.message);
    return img;
}

// PNM header token, skipping whitespace and # comments
bool next_token(std::istringstream& in, std::string& tok) {
    tok.clear();
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string rest;
            std::getline(in, rest);
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            tok.push_back(c);
            break;
        }
    }
    while (!tok.empty() && in.get(c)) {
        if (std::isspace(static_cast<unsigned char>(c))) break;
        tok.push_back(c);
    }
    return !tok.empty();
}

Image decode_pgm(const std::string& bytes, const std::string& path) {
    std::istringstream in(bytes);
    std::string magic, w, h, maxv;
    if (!next_token(in, magic) || !next_token(in, w) || !next_token(in, h) || !next_token(in, maxv))
        throw IoError("truncated PGM header in '" + path + "'");
    Image img;
    int maxval = 0;
    try {
        img.width = std::stoi(w);
        img.height = std::stoi(h);
        maxval = std::stoi(maxv);
    } catch (const std::exception&) {
        throw IoError("malformed PGM header in '" + path + "'");
    }
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
        throw IoError("unsupported PGM '" + path + "' (need 8-bit, positive size)");
    const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    img.pixels.resize(count);
    auto rescale = [maxval](int v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0, maxval) / maxval));
    };
    if (magic == "P5") {
        std::string raw(count, '\0');
        if (!in.read(raw.data(), static_cast<std::streamsize>(count)))
            throw IoError("truncated PGM data in '" + path + "'");
        for (std::size_t k = 0; k < count; ++k) img.pixels[k] = rescale(static_cast<unsigned char>(raw[k]));
    } else {
        std::string tok;
        for (std::size_t k = 0; k < count; ++k) {
            if (!next_token(in, tok)) throw IoError("truncated PGM data in '" + path + "'");
            img.pixels[k] = rescale(std::stoi(tok));
        }
    }
    return img;
}

void put(Image& img, int row, int col, const std::uint8_t* rgb) {
    if (row < 0 || col < 0 || row >= img.height || col >= img.width) return;
    std::copy(rgb, rgb + 3, img.at(row, col));
}

void draw_segment(Image& img, PixelPoint a, PixelPoint b) {
    const double dc = b.col - a.col, dr = b.row - a.row;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dc), std::abs(dr)))));
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        put(img, static_cast<int>(std::floor(a.row + t * dr)), static_cast<int>(std::floor(a.col + t * dc)),
            kContourRgb);
    }
}

}  // namespace

Image read_gray_image(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0)
        return decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        if (bytes[1] == '5' || bytes[1] == '2') return decode_pgm(bytes, path);
        if (bytes[1] == '6' || bytes[1] == '3') reject_colour(path);
    }
    throw IoError("image '" + path + "' is neither PNG nor PGM");
}

Field image_to_grid(const Image& img, int n) {
    if (n <= 0) throw std::invalid_argument("image_to_grid: n must be positive");
    if (img.channels != 1) throw std::invalid_argument("image_to_grid: expected a gray image");
    Field out = Field::square(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int col = std::min(img.width - 1, static_cast<int>((i + 0.5) * img.width / n));
        for (int j = 0; j < n; ++j) {
            const int row = std::min(img.height - 1, static_cast<int>((n - 1 - j + 0.5) * img.height / n));
            out(i, j) = *img.at(row, col) >= 128 ? 1.0 : 0.0;
        }
    }
    return out;
}

Field load_image(const std::string& path, int n) { return image_to_grid(read_gray_image(path), n); }

void write_png(const std::string& path, const Image& img) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + png.message);
}

void write_pgm(const std::string& path, const Image& img) {
    if (img.channels != 1) throw std::invalid_argument("write_pgm: gray images only");
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("cannot write PGM '" + path + "'");
}

Image render_field(const Field& field, int scale) {
    if (scale < 1) throw std::invalid_argument("render_field: scale must be >= 1");
    const int n1 = static_cast<int>(field.rows()), n2 = static_cast<int>(field.cols());
    Image img{n1 * scale, n2 * scale, 1, {}};
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int row = 0; row < img.height; ++row) {
        const int j = n2 - 1 - row / scale;
        for (int col = 0; col < img.width; ++col) {
            const double v = std::clamp(field(col / scale, j), 0.0, 1.0);
            *img.at(row, col) = static_cast<std::uint8_t>(std::lround(255.0 * v));
        }
    }
    return img;
}

PixelPoint to_pixel(double x1, double x2, const GridSpec& grid, int scale) {
    const double fi = x1 / grid.dx + grid.center();
    const double fj = x2 / grid.dx + grid.center();
    return {(fi + 0.5) * scale, (grid.n - 1 - fj + 0.5) * scale};
}

Image render_frame(const Field& field, double level, const GridSpec& grid, int scale) {
    const Image gray = render_field(field, scale);
    Image img{gray.width, gray.height, 3, {}};
    img.pixels.resize(gray.pixels.size() * 3);
    for (std::size_t k = 0; k < gray.pixels.size(); ++k)
        std::fill_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * k), 3, gray.pixels[k]);
    for (const Polyline& line : contour(field, level, grid))
        for (std::size_t k = 1; k < line.size(); ++k)
            draw_segment(img, to_pixel(line[k - 1].x1, line[k - 1].x2, grid, scale),
                         to_pixel(line[k].x1, line[k].x2, grid, scale));
    return img;
}

Image rasterize_discs(const std::vector<Disc>& discs, int n_pixels, double half_width) {
    if (n_pixels <= 0 || !(half_width > 0.0)) throw std::invalid_argument("rasterize_discs: bad size");
    Image img{n_pixels, n_pixels, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(n_pixels) * n_pixels, 0)};
    const double h = 2.0 * half_width / n_pixels;
    for (int row = 0; row < n_pixels; ++row) {
        const double x2 = half_width - (row + 0.5) * h;
        for (int col = 0; col < n_pixels; ++col) {
            const double x1 = -half_width + (col + 0.5) * h;
            for (const Disc& d : discs)
                if (std::hypot(x1 - d.x1, x2 - d.x2) <= d.radius) *img.at(row, col) = 255;
        }
    }
    return img;
}

}  // namespace phasereg
