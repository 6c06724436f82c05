#include "cds/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cds {

// ---- PFM ----

void write_pfm(const std::string& path, const Array& map) {
    if (map.rank() != 2) throw std::invalid_argument("write_pfm: expected [H,W]");
    const int H = map.dim(0), W = map.dim(1);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write PFM: " + path);
    os << "Pf\n" << W << " " << H << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(W));
    for (int y = H - 1; y >= 0; --y) { // bottom-to-top
        for (int x = 0; x < W; ++x) row[static_cast<size_t>(x)] = static_cast<float>(map.at(y, x));
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(W * sizeof(float)));
    }
    if (!os) throw std::runtime_error("PFM write failed: " + path);
}

Array read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open PFM: " + path);
    std::string magic;
    is >> magic;
    if (magic != "Pf") throw std::runtime_error("not a grayscale PFM: " + path);
    int W = 0, H = 0;
    double scale = 0;
    is >> W >> H >> scale;
    is.get(); // single whitespace after the header
    if (W <= 0 || H <= 0 || scale == 0) throw std::runtime_error("bad PFM header: " + path);
    const bool little = scale < 0;
    Array out({H, W});
    std::vector<unsigned char> row(static_cast<size_t>(W) * 4);
    for (int y = H - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!is) throw std::runtime_error("truncated PFM: " + path);
        for (int x = 0; x < W; ++x) {
            uint32_t u = 0;
            if (little)
                u = row[4 * x] | (row[4 * x + 1] << 8) | (row[4 * x + 2] << 16)
                    | (static_cast<uint32_t>(row[4 * x + 3]) << 24);
            else
                u = row[4 * x + 3] | (row[4 * x + 2] << 8) | (row[4 * x + 1] << 16)
                    | (static_cast<uint32_t>(row[4 * x]) << 24);
            float f;
            std::memcpy(&f, &u, 4);
            out.at(y, x) = static_cast<double>(f);
        }
    }
    return out;
}

// ---- PNG ----

namespace {

uint32_t crc32_of(const unsigned char* data, size_t n, uint32_t seed = 0) {
    return static_cast<uint32_t>(::crc32(seed, data, static_cast<uInt>(n)));
}

void put_u32(std::vector<unsigned char>& v, uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

void write_chunk(std::ofstream& os, const char type[4], const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> head;
    put_u32(head, static_cast<uint32_t>(payload.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    std::vector<unsigned char> crc;
    put_u32(crc, crc32_of(body.data(), body.size()));
    os.write(reinterpret_cast<const char*>(crc.data()), 4);
}

unsigned char quantize(double v) {
    const double c = v < 0 ? 0 : (v > 1 ? 1 : v);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

void write_png(const std::string& path, const Array& image) {
    const bool gray = image.rank() == 2;
    if (!gray && (image.rank() != 3 || image.dim(0) != 3))
        throw std::invalid_argument("write_png: expected [3,H,W] or [H,W]");
    const int H = gray ? image.dim(0) : image.dim(1);
    const int W = gray ? image.dim(1) : image.dim(2);
    const int ch = gray ? 1 : 3;
    const long plane = static_cast<long>(H) * W;

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(H) * (static_cast<size_t>(W) * ch + 1));
    for (int y = 0; y < H; ++y) {
        raw.push_back(0); // filter: none
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < ch; ++c)
                raw.push_back(quantize(image[c * plane + static_cast<long>(y) * W + x]));
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("PNG deflate failed: " + path);
    compressed.resize(bound);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write PNG: " + path);
    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(W));
    put_u32(ihdr, static_cast<uint32_t>(H));
    ihdr.push_back(8);                     // bit depth
    ihdr.push_back(gray ? 0 : 2);          // color type
    ihdr.push_back(0);                     // compression
    ihdr.push_back(0);                     // filter method
    ihdr.push_back(0);                     // no interlace
    write_chunk(os, "IHDR", ihdr);
    write_chunk(os, "IDAT", compressed);
    write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("PNG write failed: " + path);
}

Array read_png(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open PNG: " + path);
    std::vector<unsigned char> file((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
        throw std::runtime_error("not a PNG: " + path);

    auto rd_u32 = [&](size_t off) {
        return (static_cast<uint32_t>(file[off]) << 24) | (static_cast<uint32_t>(file[off + 1]) << 16) |
               (static_cast<uint32_t>(file[off + 2]) << 8) | file[off + 3];
    };

    int W = 0, H = 0, color = -1, depth = 0;
    std::vector<unsigned char> idat;
    size_t off = 8;
    while (off + 8 <= file.size()) {
        const uint32_t len = rd_u32(off);
        if (off + 12 + len > file.size()) throw std::runtime_error("truncated PNG: " + path);
        const char* type = reinterpret_cast<const char*>(&file[off + 4]);
        const unsigned char* payload = &file[off + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            W = static_cast<int>(rd_u32(off + 8));
            H = static_cast<int>(rd_u32(off + 12));
            depth = payload[8];
            color = payload[9];
            if (payload[12] != 0) throw std::runtime_error("interlaced PNG unsupported: " + path);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (W <= 0 || H <= 0 || depth != 8 || (color != 0 && color != 2 && color != 6))
        throw std::runtime_error("unsupported PNG layout (need 8-bit gray/RGB/RGBA): " + path);
    const int ch = color == 0 ? 1 : (color == 2 ? 3 : 4);

    const size_t stride = static_cast<size_t>(W) * ch;
    std::vector<unsigned char> raw(static_cast<size_t>(H) * (stride + 1));
    uLongf out_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        out_len != raw.size())
        throw std::runtime_error("PNG inflate failed: " + path);

    // Undo per-row filters in place into `pix`.
    std::vector<unsigned char> pix(static_cast<size_t>(H) * stride);
    for (int y = 0; y < H; ++y) {
        const unsigned char filter = raw[static_cast<size_t>(y) * (stride + 1)];
        const unsigned char* src = &raw[static_cast<size_t>(y) * (stride + 1) + 1];
        unsigned char* dst = &pix[static_cast<size_t>(y) * stride];
        const unsigned char* up = y ? &pix[static_cast<size_t>(y - 1) * stride] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<size_t>(ch) ? dst[i - ch] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<size_t>(ch)) ? up[i - ch] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("bad PNG filter type: " + path);
            }
            dst[i] = static_cast<unsigned char>(v & 0xff);
        }
    }

    Array out({3, H, W});
    const long plane = static_cast<long>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const unsigned char* p = &pix[static_cast<size_t>(y) * stride + static_cast<size_t>(x) * ch];
            const double r = p[0] / 255.0;
            const double g = (ch >= 3 ? p[1] : p[0]) / 255.0;
            const double b = (ch >= 3 ? p[2] : p[0]) / 255.0;
            out[static_cast<long>(y) * W + x] = r;
            out[plane + static_cast<long>(y) * W + x] = g;
            out[2 * plane + static_cast<long>(y) * W + x] = b;
        }
    return out;
}

// ---- PLY ----

void write_ply(const std::string& path, const PointCloud& cloud) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write PLY: " + path);
    os << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
       << "\nproperty float x\nproperty float y\nproperty float z\n"
          "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    os << std::setprecision(9);
    for (const auto& p : cloud.points)
        os << p.x << " " << p.y << " " << p.z << " " << static_cast<int>(quantize(p.r)) << " "
           << static_cast<int>(quantize(p.g)) << " " << static_cast<int>(quantize(p.b)) << "\n";
    if (!os) throw std::runtime_error("PLY write failed: " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open PLY: " + path);
    std::string line;
    long count = -1;
    int props = 0;
    bool header_done = false;
    if (!std::getline(is, line) || line.substr(0, 3) != "ply") throw std::runtime_error("not a PLY: " + path);
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "element") {
            std::string what;
            ls >> what >> count;
            if (what != "vertex") throw std::runtime_error("PLY without vertex element: " + path);
        } else if (tok == "property") {
            ++props;
        } else if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw std::runtime_error("binary PLY unsupported: " + path);
        } else if (tok == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done || count < 0) throw std::runtime_error("bad PLY header: " + path);

    PointCloud cloud;
    cloud.points.reserve(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i) {
        PlyPoint p;
        double r = 0, g = 0, b = 0;
        if (!(is >> p.x >> p.y >> p.z)) throw std::runtime_error("truncated PLY: " + path);
        if (props >= 6) {
            if (!(is >> r >> g >> b)) throw std::runtime_error("truncated PLY: " + path);
            p.r = r / 255.0;
            p.g = g / 255.0;
            p.b = b / 255.0;
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

} // namespace cds
