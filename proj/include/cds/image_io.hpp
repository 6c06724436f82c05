#pragma once

#include <string>
#include <vector>

#include "cds/array.hpp"

namespace cds {

// PFM, grayscale ("Pf"), negative scale = little-endian, rows bottom-to-top.
// Values pass through f32; write->read round trips are f32-exact.
void write_pfm(const std::string& path, const Array& map); // [H,W]
Array read_pfm(const std::string& path);

// 8-bit PNG. Writing emits RGB (or grayscale for [H,W] input) with zlib
// compression; reading accepts gray / RGB / RGBA, 8-bit, non-interlaced.
void write_png(const std::string& path, const Array& image); // [3,H,W] or [H,W], values in [0,1]
Array read_png(const std::string& path);                     // [3,H,W] in [0,1]

struct PlyPoint {
    double x = 0, y = 0, z = 0;
    double r = 0, g = 0, b = 0; // [0,1], stored as uchar in the file
};

struct PointCloud {
    std::vector<PlyPoint> points;
};

void write_ply(const std::string& path, const PointCloud& cloud); // ascii
PointCloud read_ply(const std::string& path);

} // namespace cds
