#include "scd/image.hpp"

#include <fstream>
#include <istream>
#include <string>

#include "scd/error.hpp"

namespace scd {

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
}

namespace {

struct NetpbmHeader {
    std::string magic;
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned maxval = 0;
};

void skip_space_and_comments(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path, const char* expected) {
    NetpbmHeader h;
    in >> h.magic;
    if (h.magic != expected) {
        throw ValidationError(path.string() + ": expected " + expected + " netpbm, found '" + h.magic + "'");
    }
    skip_space_and_comments(in);
    in >> h.width;
    skip_space_and_comments(in);
    in >> h.height;
    skip_space_and_comments(in);
    in >> h.maxval;
    if (!in || h.width == 0 || h.height == 0 || h.maxval != 255) {
        throw ValidationError(path.string() + ": malformed netpbm header");
    }
    in.get();  // single whitespace byte before the raster
    return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path, "P6");
    Image img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
        throw ValidationError(path.string() + ": truncated PPM raster");
    }
    return img;
}

ImageSize read_ppm_size(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path, "P6");
    return {h.width, h.height};
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Mask read_pgm_mask(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path, "P5");
    Mask m(h.width, h.height);
    in.read(reinterpret_cast<char*>(m.bits.data()), static_cast<std::streamsize>(m.bits.size()));
    if (in.gcount() != static_cast<std::streamsize>(m.bits.size())) {
        throw ValidationError(path.string() + ": truncated PGM raster");
    }
    for (auto& b : m.bits) b = b != 0;
    return m;
}

void write_pgm_mask(const Mask& mask, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    std::vector<char> raster(mask.bits.size());
    for (std::size_t i = 0; i < raster.size(); ++i) raster[i] = mask.bits[i] ? char(255) : char(0);
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace scd
