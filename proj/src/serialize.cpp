#include "phasereg/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "phasereg/errors.hpp"

namespace phasereg {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'H', 'R', 'E', 'G', 'C', 'T', 'L'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
    if (!os) throw IoError("write failed");
}

template <class T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (is.gcount() != static_cast<std::streamsize>(sizeof v)) throw IoError("unexpected end of file");
    return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
void write_f64(std::ostream& os, double v) { put(os, v); }
std::uint32_t read_u32(std::istream& is) { return get<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return get<std::uint64_t>(is); }
double read_f64(std::istream& is) { return get<double>(is); }

void write_f64s(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!os) throw IoError("write failed");
}

std::vector<double> read_f64s(std::istream& is, std::size_t count) {
    std::vector<double> v(count);
    const auto bytes = static_cast<std::streamsize>(count * sizeof(double));
    is.read(reinterpret_cast<char*>(v.data()), bytes);
    if (is.gcount() != bytes) throw IoError("unexpected end of file");
    return v;
}

void write_grids(std::ostream& os, const GridFileHeader& header, const std::vector<Field>& grids) {
    if (grids.size() != header.grid_count) throw std::invalid_argument("write_grids: grid count mismatch");
    os.write(kMagic, sizeof kMagic);
    put(os, kGridFileVersion);
    put(os, header.n);
    put(os, header.time_steps);
    put(os, header.p);
    put(os, header.r);
    put(os, header.grid_count);
    for (const Field& g : grids) {
        if (g.rows() != header.n || g.cols() != header.n)
            throw std::invalid_argument("write_grids: grid shape does not match header");
        os.write(reinterpret_cast<const char*>(g.values().data()),
                 static_cast<std::streamsize>(g.size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed");
}

std::vector<Field> read_grids(std::istream& is, GridFileHeader& header) {
    char magic[sizeof kMagic];
    is.read(magic, sizeof magic);
    if (is.gcount() != static_cast<std::streamsize>(sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError("not a grid container (bad magic)");
    const auto version = get<std::uint32_t>(is);
    if (version != kGridFileVersion) throw IoError("unsupported container version " + std::to_string(version));
    header.n = get<std::uint32_t>(is);
    header.time_steps = get<std::uint32_t>(is);
    header.p = get<double>(is);
    header.r = get<double>(is);
    header.grid_count = get<std::uint32_t>(is);
    if (header.n == 0 || header.n > 100000) throw IoError("implausible grid size " + std::to_string(header.n));

    std::vector<Field> grids;
    grids.reserve(header.grid_count);
    for (std::uint32_t k = 0; k < header.grid_count; ++k) {
        Field f(header.n, header.n);
        const auto bytes = static_cast<std::streamsize>(f.size() * sizeof(double));
        is.read(reinterpret_cast<char*>(f.values().data()), bytes);
        if (is.gcount() != bytes) throw IoError("truncated grid " + std::to_string(k));
        grids.push_back(std::move(f));
    }
    return grids;
}

void write_controls(std::ostream& os, const ControlSet& c, const GridSpec& grid, const NormPowers& powers) {
    c.validate(grid);
    GridFileHeader h;
    h.n = static_cast<std::uint32_t>(grid.n);
    h.time_steps = static_cast<std::uint32_t>(grid.time_steps);
    h.p = powers.p();
    h.r = powers.r();
    std::vector<Field> grids;
    for (const auto* block : {&c.u.slices, &c.m.m1, &c.m.m2}) grids.insert(grids.end(), block->begin(), block->end());
    h.grid_count = static_cast<std::uint32_t>(grids.size());
    write_grids(os, h, grids);
}

ControlSet read_controls(std::istream& is, const GridSpec& grid, GridFileHeader* header) {
    GridFileHeader h;
    std::vector<Field> grids = read_grids(is, h);
    if (static_cast<int>(h.n) != grid.n || static_cast<int>(h.time_steps) != grid.time_steps)
        throw IoError("controls were written for N=" + std::to_string(h.n) + ", T=" + std::to_string(h.time_steps) +
                      " but the run uses N=" + std::to_string(grid.n) + ", T=" + std::to_string(grid.time_steps));
    const auto steps = static_cast<std::size_t>(grid.time_steps - 1);
    if (grids.size() != 3 * steps) throw IoError("controls container holds the wrong number of grids");
    ControlSet c;
    c.u.slices.assign(grids.begin(), grids.begin() + static_cast<std::ptrdiff_t>(steps));
    c.m.m1.assign(grids.begin() + static_cast<std::ptrdiff_t>(steps), grids.begin() + static_cast<std::ptrdiff_t>(2 * steps));
    c.m.m2.assign(grids.begin() + static_cast<std::ptrdiff_t>(2 * steps), grids.end());
    try {
        c.validate(grid);
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("invalid controls in container: ") + e.what());
    }
    if (header) *header = h;
    return c;
}

void save_controls(const std::string& path, const ControlSet& c, const GridSpec& grid, const NormPowers& powers) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_controls(os, c, grid, powers);
}

ControlSet load_controls(const std::string& path, const GridSpec& grid, GridFileHeader* header) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return read_controls(is, grid, header);
}

}  // namespace phasereg
