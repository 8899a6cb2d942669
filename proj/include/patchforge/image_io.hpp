#ifndef PATCHFORGE_IMAGE_IO_HPP
#define PATCHFORGE_IMAGE_IO_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "raster.hpp"

namespace patchforge {

/// 8-bit quantization used for files and the wire format: round(v * 255).
inline std::uint8_t to_byte(double v) noexcept {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline double from_byte(std::uint8_t b) noexcept { return static_cast<double>(b) / 255.0; }

namespace detail {

inline void skip_netpbm_space(std::istream &in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

inline unsigned long read_netpbm_number(std::istream &in, const std::string &path) {
    skip_netpbm_space(in);
    unsigned long v = 0;
    if (!(in >> v)) throw ParseError(path + ": malformed Netpbm header");
    return v;
}

struct RawRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> samples;
};

inline RawRaster read_netpbm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open");
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw ParseError(path.string() + ": expected binary PGM (P5) or PPM (P6)");
    RawRaster r;
    r.channels = magic[1] == '5' ? 1 : 3;
    r.width = read_netpbm_number(in, path.string());
    r.height = read_netpbm_number(in, path.string());
    const unsigned long maxval = read_netpbm_number(in, path.string());
    if (maxval != 255) throw ParseError(path.string() + ": only maxval 255 is supported");
    if (r.width == 0 || r.height == 0) throw ParseError(path.string() + ": empty raster");
    in.get(); // the single whitespace byte before the raster
    r.samples.resize(r.width * r.height * r.channels);
    in.read(reinterpret_cast<char *>(r.samples.data()), static_cast<std::streamsize>(r.samples.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.samples.size()))
        throw ParseError(path.string() + ": truncated raster");
    return r;
}

inline void write_netpbm(const std::filesystem::path &path, std::size_t width, std::size_t height,
                         std::size_t channels, const std::vector<std::uint8_t> &samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path.string() + ": cannot open for writing");
    out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char *>(samples.data()), static_cast<std::streamsize>(samples.size()));
    if (!out) throw ParseError(path.string() + ": write failed");
}

} // namespace detail

inline Image read_image(const std::filesystem::path &path) {
    const auto raw = detail::read_netpbm(path);
    Image img(raw.height, raw.width, raw.channels);
    auto v = img.values();
    for (std::size_t i = 0; i < raw.samples.size(); ++i) v[i] = from_byte(raw.samples[i]);
    return img;
}

/// PGM for one channel, PPM for three.
inline void write_image(const std::filesystem::path &path, const Image &img) {
    std::vector<std::uint8_t> samples(img.values().size());
    std::transform(img.values().begin(), img.values().end(), samples.begin(), to_byte);
    detail::write_netpbm(path, img.width(), img.height(), img.channels(), samples);
}

/// Masks are stored as PGM with 0 / 255; any sample >= 128 reads back as 1.
inline Mask read_mask(const std::filesystem::path &path) {
    const auto raw = detail::read_netpbm(path);
    if (raw.channels != 1) throw ParseError(path.string() + ": masks must be PGM");
    Mask m(raw.height, raw.width);
    auto bits = m.bits();
    for (std::size_t i = 0; i < raw.samples.size(); ++i) bits[i] = raw.samples[i] >= 128 ? 1 : 0;
    return m;
}

inline void write_mask(const std::filesystem::path &path, const Mask &m) {
    std::vector<std::uint8_t> samples(m.bits().size());
    std::transform(m.bits().begin(), m.bits().end(), samples.begin(),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
    detail::write_netpbm(path, m.width(), m.height(), 1, samples);
}

/// Nearest-neighbor upscale by an integer factor (print templates).
inline Mask upscale_mask(const Mask &m, std::size_t factor) {
    if (factor <= 1) return m;
    Mask out(m.height() * factor, m.width() * factor);
    for (std::size_t r = 0; r < out.height(); ++r)
        for (std::size_t c = 0; c < out.width(); ++c) out.set(r, c, m(r / factor, c / factor) != 0);
    return out;
}

} // namespace patchforge

#endif
