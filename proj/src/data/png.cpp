#include "fcnseg/png.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "fcnseg/errors.hpp"

namespace fcnseg {
namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

enum ColorType : std::uint8_t { kGray = 0, kRgb = 2, kIndexed = 3, kGrayAlpha = 4, kRgba = 6 };

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], std::span<const std::uint8_t> data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> deflate_bytes(const std::vector<std::uint8_t>& raw) {
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(len);
    if (compress2(out.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw FormatError("png: deflate failed");
    }
    out.resize(len);
    return out;
}

std::vector<std::uint8_t> encode(int width, int height, std::uint8_t color_type, int channels,
                                 const std::uint8_t* samples, const Palette* palette) {
    if (width <= 0 || height <= 0) throw FormatError("png: empty image");
    std::vector<std::uint8_t> out(std::begin(kSignature), std::end(kSignature));

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.insert(ihdr.end(), {8, color_type, 0, 0, 0});
    put_chunk(out, "IHDR", ihdr);

    if (palette) {
        std::vector<std::uint8_t> plte;
        for (const auto& c : *palette) plte.insert(plte.end(), c.begin(), c.end());
        put_chunk(out, "PLTE", plte);
    }

    const std::size_t row = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((row + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), samples + y * row, samples + (y + 1) * row);
    }
    put_chunk(out, "IDAT", deflate_bytes(raw));
    put_chunk(out, "IEND", {});
    return out;
}

struct Decoded {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    std::uint8_t color_type = 0;
    Palette palette;
    std::vector<std::uint8_t> rows;  // unfiltered, no filter bytes, packed at bit_depth
    std::size_t row_bytes = 0;
};

int channels_of(std::uint8_t color_type) {
    switch (color_type) {
        case kGray: return 1;
        case kRgb: return 3;
        case kIndexed: return 1;
        case kGrayAlpha: return 2;
        case kRgba: return 4;
        default: throw FormatError("png: unknown colour type " + std::to_string(color_type));
    }
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

Decoded decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) throw FormatError("png: bad signature");
    Decoded d;
    std::vector<std::uint8_t> idat;
    bool have_header = false;
    bool ended = false;
    std::size_t pos = 8;
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = get_u32(&bytes[pos]);
        if (len > bytes.size() - pos - 12) throw FormatError("png: truncated chunk");
        const std::uint8_t* type = &bytes[pos + 4];
        const std::uint8_t* data = &bytes[pos + 8];
        const auto crc = static_cast<std::uint32_t>(crc32(0L, type, len + 4));
        if (crc != get_u32(data + len)) throw FormatError("png: chunk CRC mismatch");
        const std::string name(reinterpret_cast<const char*>(type), 4);
        if (name == "IHDR") {
            if (len != 13) throw FormatError("png: bad IHDR length");
            d.width = static_cast<int>(get_u32(data));
            d.height = static_cast<int>(get_u32(data + 4));
            d.bit_depth = data[8];
            d.color_type = data[9];
            if (data[10] != 0 || data[11] != 0) throw FormatError("png: unsupported compression or filter method");
            if (data[12] != 0) throw FormatError("png: interlaced images are not supported");
            if (d.width <= 0 || d.height <= 0) throw FormatError("png: empty image");
            have_header = true;
        } else if (name == "PLTE") {
            if (len % 3 != 0 || len == 0 || len > 768) throw FormatError("png: bad PLTE length");
            for (std::uint32_t i = 0; i < len; i += 3) d.palette.push_back({data[i], data[i + 1], data[i + 2]});
        } else if (name == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (name == "IEND") {
            ended = true;
            break;
        } else if (!(type[0] & 0x20)) {
            throw FormatError("png: unknown critical chunk " + name);
        }
        pos += 12 + len;
    }
    if (!have_header) throw FormatError("png: missing IHDR");
    if (!ended) throw FormatError("png: missing IEND");

    const int channels = channels_of(d.color_type);
    const int bpp_bits = channels * d.bit_depth;
    d.row_bytes = (static_cast<std::size_t>(d.width) * bpp_bits + 7) / 8;
    const std::size_t bpp = std::max(1, bpp_bits / 8);
    uLongf raw_len = static_cast<uLongf>((d.row_bytes + 1) * d.height);
    std::vector<std::uint8_t> raw(raw_len);
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw FormatError("png: corrupt image data");
    }

    d.rows.assign(d.row_bytes * d.height, 0);
    for (int y = 0; y < d.height; ++y) {
        const std::uint8_t filter = raw[y * (d.row_bytes + 1)];
        const std::uint8_t* src = &raw[y * (d.row_bytes + 1) + 1];
        std::uint8_t* cur = &d.rows[y * d.row_bytes];
        const std::uint8_t* prev = y > 0 ? &d.rows[(y - 1) * d.row_bytes] : nullptr;
        for (std::size_t i = 0; i < d.row_bytes; ++i) {
            const int a = i >= bpp ? cur[i - bpp] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= bpp) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw FormatError("png: bad filter type " + std::to_string(filter));
            }
            cur[i] = static_cast<std::uint8_t>(v);
        }
    }
    return d;
}

std::uint8_t packed_sample(const Decoded& d, int x, int y) {
    const std::uint8_t* row = &d.rows[y * d.row_bytes];
    if (d.bit_depth == 8) return row[x];
    const int per_byte = 8 / d.bit_depth;
    const int shift = 8 - d.bit_depth * (x % per_byte + 1);
    return static_cast<std::uint8_t>((row[x / per_byte] >> shift) & ((1 << d.bit_depth) - 1));
}

}  // namespace

const Palette& voc_palette() {
    static const Palette palette = [] {
        Palette p(256);
        for (int i = 0; i < 256; ++i) {
            int c = i;
            Rgb rgb{0, 0, 0};
            for (int j = 0; j < 8; ++j) {
                rgb[0] |= static_cast<std::uint8_t>(((c >> 0) & 1) << (7 - j));
                rgb[1] |= static_cast<std::uint8_t>(((c >> 1) & 1) << (7 - j));
                rgb[2] |= static_cast<std::uint8_t>(((c >> 2) & 1) << (7 - j));
                c >>= 3;
            }
            p[i] = rgb;
        }
        return p;
    }();
    return palette;
}

std::vector<std::uint8_t> encode_paletted_png(const LabelImage& label, const Palette& palette) {
    if (palette.empty() || palette.size() > 256) throw FormatError("png: palette must have 1..256 entries");
    if (label.pixels.size() != static_cast<std::size_t>(label.width) * label.height) {
        throw ShapeError("label raster size does not match its extents");
    }
    for (auto v : label.pixels) {
        if (v >= palette.size()) throw DataError("label index " + std::to_string(v) + " has no palette entry");
    }
    return encode(label.width, label.height, kIndexed, 1, label.pixels.data(), &palette);
}

LabelImage decode_paletted_png(std::span<const std::uint8_t> bytes, Palette* palette_out) {
    const Decoded d = decode(bytes);
    if (d.color_type != kIndexed) {
        throw FormatError("png: expected a palette image, got colour type " + std::to_string(d.color_type));
    }
    if (d.bit_depth != 1 && d.bit_depth != 2 && d.bit_depth != 4 && d.bit_depth != 8) {
        throw FormatError("png: bad bit depth " + std::to_string(d.bit_depth));
    }
    if (d.palette.empty()) throw FormatError("png: palette image without PLTE");
    LabelImage out(d.width, d.height);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) out.at(x, y) = packed_sample(d, x, y);
    if (palette_out) *palette_out = d.palette;
    return out;
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
    if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw ShapeError("rgb raster size does not match its extents");
    }
    return encode(image.width, image.height, kRgb, 3, image.rgb.data(), nullptr);
}

RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes) {
    const Decoded d = decode(bytes);
    RgbImage out(d.width, d.height);
    if (d.color_type == kIndexed) {
        if (d.palette.empty()) throw FormatError("png: palette image without PLTE");
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                const auto i = packed_sample(d, x, y);
                if (i >= d.palette.size()) throw FormatError("png: palette index out of range");
                std::memcpy(out.px(x, y), d.palette[i].data(), 3);
            }
        }
        return out;
    }
    if (d.bit_depth != 8) throw FormatError("png: only 8-bit photographs are supported");
    const int channels = channels_of(d.color_type);
    for (int y = 0; y < d.height; ++y) {
        const std::uint8_t* row = &d.rows[y * d.row_bytes];
        for (int x = 0; x < d.width; ++x) {
            const std::uint8_t* s = row + x * channels;
            std::uint8_t* p = out.px(x, y);
            if (channels <= 2) {
                p[0] = p[1] = p[2] = s[0];
            } else {
                p[0] = s[0];
                p[1] = s[1];
                p[2] = s[2];
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to " + path.string());
}

}  // namespace fcnseg
