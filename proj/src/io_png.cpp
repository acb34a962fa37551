#include "interp3d/io_png.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "interp3d/errors.hpp"

namespace interp3d {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
    uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    return c;
}

uint32_t crc32(const std::vector<uint8_t>& data) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t n = 0; n < 256; ++n) table[n] = crc32_table_entry(n);
        init = true;
    }
    uint32_t c = 0xffffffffu;
    for (uint8_t b : data) c = table[(c ^ b) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

uint32_t adler32(const std::vector<uint8_t>& data) {
    uint32_t a = 1, b = 0;
    for (uint8_t byte : data) {
        a = (a + byte) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    const uint32_t crc = crc32(body);
    std::vector<uint8_t> framed;
    push_u32(framed, static_cast<uint32_t>(payload.size()));
    framed.insert(framed.end(), body.begin(), body.end());
    push_u32(framed, crc);
    out.write(reinterpret_cast<const char*>(framed.data()),
              static_cast<std::streamsize>(framed.size()));
}

// zlib stream with stored (uncompressed) deflate blocks
std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t offset = 0;
    constexpr size_t kBlock = 65535;
    while (true) {
        const size_t len = std::min(kBlock, raw.size() - offset);
        const bool final_block = offset + len == raw.size();
        z.push_back(final_block ? 1 : 0);
        z.push_back(static_cast<uint8_t>(len & 0xff));
        z.push_back(static_cast<uint8_t>(len >> 8));
        z.push_back(static_cast<uint8_t>(~len & 0xff));
        z.push_back(static_cast<uint8_t>((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(offset),
                 raw.begin() + static_cast<std::ptrdiff_t>(offset + len));
        offset += len;
        if (final_block) break;
    }
    push_u32(z, adler32(raw));
    return z;
}

uint8_t to_byte(float v) {
    const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<uint8_t>(std::lround(clamped * 255.0f));
}

}  // namespace

void write_png(const std::string& path, int width, int height,
               const std::vector<float>& rgb) {
    if (width < 1 || height < 1 ||
        rgb.size() != static_cast<size_t>(width) * height * 3) {
        throw InvalidInputError("write_png: size mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    static const uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(signature), 8);

    std::vector<uint8_t> ihdr;
    push_u32(ihdr, static_cast<uint32_t>(width));
    push_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    write_chunk(out, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter type none
        for (int x = 0; x < width; ++x) {
            const size_t p = (static_cast<size_t>(y) * width + x) * 3;
            raw.push_back(to_byte(rgb[p]));
            raw.push_back(to_byte(rgb[p + 1]));
            raw.push_back(to_byte(rgb[p + 2]));
        }
    }
    write_chunk(out, "IDAT", zlib_stored(raw));
    write_chunk(out, "IEND", {});
    if (!out) throw IoError("write failed: " + path);
}

void write_view_grid_png(const std::string& path, const std::vector<RenderedView>& views,
                         int columns) {
    if (views.empty()) throw InvalidInputError("write_view_grid_png: no views");
    if (columns < 1) columns = 1;
    const int vw = views[0].width;
    const int vh = views[0].height;
    constexpr int kGutter = 2;
    const int rows = (static_cast<int>(views.size()) + columns - 1) / columns;
    const int width = columns * vw + (columns - 1) * kGutter;
    const int height = rows * vh + (rows - 1) * kGutter;
    std::vector<float> canvas(static_cast<size_t>(width) * height * 3, 1.0f);
    for (size_t i = 0; i < views.size(); ++i) {
        const int cx = (static_cast<int>(i) % columns) * (vw + kGutter);
        const int cy = (static_cast<int>(i) / columns) * (vh + kGutter);
        for (int y = 0; y < vh; ++y) {
            for (int x = 0; x < vw; ++x) {
                const size_t src = (static_cast<size_t>(y) * vw + x) * 3;
                const size_t dst = (static_cast<size_t>(cy + y) * width + (cx + x)) * 3;
                canvas[dst] = views[i].rgb[src];
                canvas[dst + 1] = views[i].rgb[src + 1];
                canvas[dst + 2] = views[i].rgb[src + 2];
            }
        }
    }
    write_png(path, width, height, canvas);
}

}  // namespace interp3d
