#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phasereg/controls.hpp"
#include "phasereg/field.hpp"

namespace phasereg {

/// Header of the flat grid container: magic "PHREGCTL", then version, N, T
/// (uint32), p, r (float64), grid count (uint32); then grid_count N x N
/// row-major float64 grids. Everything little-endian.
struct GridFileHeader {
    std::uint32_t n = 0;
    std::uint32_t time_steps = 0;
    double p = 0.0;
    double r = 0.0;
    std::uint32_t grid_count = 0;
};

inline constexpr std::uint32_t kGridFileVersion = 1;

void write_grids(std::ostream& os, const GridFileHeader& header, const std::vector<Field>& grids);
/// Reads the header and the grids; throws IoError on a bad magic, version or short read.
std::vector<Field> read_grids(std::istream& is, GridFileHeader& header);

/// Controls as 3 (T - 1) grids: u slices, then m1, then m2.
void write_controls(std::ostream& os, const ControlSet& c, const GridSpec& grid, const NormPowers& powers);
ControlSet read_controls(std::istream& is, const GridSpec& grid, GridFileHeader* header = nullptr);

void save_controls(const std::string& path, const ControlSet& c, const GridSpec& grid, const NormPowers& powers);
ControlSet load_controls(const std::string& path, const GridSpec& grid, GridFileHeader* header = nullptr);

// Raw little-endian scalars, shared with the optimizer checkpoint trailer.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_f64s(std::ostream& os, const std::vector<double>& v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
std::vector<double> read_f64s(std::istream& is, std::size_t count);

}  // namespace phasereg
