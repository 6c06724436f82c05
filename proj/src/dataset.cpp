#include "cds/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cds/image_io.hpp"

namespace fs = std::filesystem;

namespace cds {

namespace {

std::string view_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", i);
    return buf;
}

} // namespace

void write_scene_dataset(const Scene& scene, const std::string& dir) {
    fs::create_directories(dir + "/images");
    fs::create_directories(dir + "/cams");
    fs::create_directories(dir + "/depths");
    const int n = static_cast<int>(scene.views.size());
    for (int i = 0; i < n; ++i) {
        const View& v = scene.views[static_cast<size_t>(i)];
        write_png(dir + "/images/" + view_name(i) + ".png", v.image);
        write_camera_file(dir + "/cams/" + view_name(i) + "_cam.txt", v.cam);
        write_pfm(dir + "/depths/" + view_name(i) + ".pfm", v.gt_depth);
    }
    const auto pairs = default_pairs(n);
    std::ofstream os(dir + "/pair.txt");
    if (!os) throw std::runtime_error("cannot write pair.txt in " + dir);
    os << n << "\n";
    for (int i = 0; i < n; ++i) {
        os << i << "\n" << pairs[static_cast<size_t>(i)].size();
        for (int s : pairs[static_cast<size_t>(i)]) os << " " << s;
        os << "\n";
    }
}

DatasetScene read_scene_dataset(const std::string& dir) {
    DatasetScene out;
    if (!fs::exists(dir + "/pair.txt")) throw std::runtime_error("not a scene directory (no pair.txt): " + dir);

    std::ifstream ps(dir + "/pair.txt");
    auto next_line_tokens = [&]() {
        std::string line;
        while (std::getline(ps, line)) {
            std::istringstream ls(line);
            std::vector<double> toks;
            double t;
            while (ls >> t) toks.push_back(t);
            if (!toks.empty()) return toks;
        }
        throw std::runtime_error("truncated pair.txt: " + dir);
    };

    const int n = static_cast<int>(next_line_tokens().at(0));
    out.pairs.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int ref = static_cast<int>(next_line_tokens().at(0));
        if (ref < 0 || ref >= n) throw std::runtime_error("pair.txt: bad reference index in " + dir);
        const std::vector<double> entry = next_line_tokens();
        const int count = static_cast<int>(entry.at(0));
        // "count src src ..." or MVSNet's "count src score src score ..."
        std::vector<int> srcs;
        size_t stride = 1;
        if (entry.size() == static_cast<size_t>(1 + 2 * count))
            stride = 2;
        else if (entry.size() != static_cast<size_t>(1 + count))
            throw std::runtime_error("pair.txt: malformed source list in " + dir);
        for (int k = 0; k < count; ++k) srcs.push_back(static_cast<int>(entry.at(1 + stride * k)));
        out.pairs[static_cast<size_t>(ref)] = srcs;
    }

    for (int i = 0; i < n; ++i) {
        InputView v;
        v.image = read_png(dir + "/images/" + view_name(i) + ".png");
        v.cam = read_camera_file(dir + "/cams/" + view_name(i) + "_cam.txt");
        out.views.push_back(std::move(v));
        const std::string dpath = dir + "/depths/" + view_name(i) + ".pfm";
        if (fs::exists(dpath)) out.gt_depths.push_back(read_pfm(dpath));
    }
    if (!out.gt_depths.empty() && out.gt_depths.size() != out.views.size())
        throw std::runtime_error("scene has partial ground truth: " + dir);
    return out;
}

std::vector<std::string> list_scene_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (!fs::exists(root)) throw std::runtime_error("dataset root does not exist: " + root);
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "pair.txt")) dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no scene directories under " + root);
    return dirs;
}

std::vector<TrainSample> samples_from_dataset(const DatasetScene& scene, int max_srcs) {
    if (!scene.has_gt()) throw std::runtime_error("training samples need ground-truth depths");
    std::vector<TrainSample> out;
    const int n = static_cast<int>(scene.views.size());
    for (int r = 0; r < n; ++r) {
        TrainSample s;
        s.ref = scene.views[static_cast<size_t>(r)];
        for (int src : scene.pairs[static_cast<size_t>(r)]) {
            if (static_cast<int>(s.srcs.size()) >= max_srcs) break;
            s.srcs.push_back(scene.views[static_cast<size_t>(src)]);
        }
        s.gt_depth = scene.gt_depths[static_cast<size_t>(r)];
        s.mask = Array(s.gt_depth.shape());
        for (long i = 0; i < s.mask.numel(); ++i) s.mask[i] = s.gt_depth[i] > 0 ? 1.0 : 0.0;
        s.gt_levels[3] = s.gt_depth;
        s.mask_levels[3] = s.mask;
        for (int l = 2; l >= 0; --l) {
            s.gt_levels[l] = area_downsample2(s.gt_levels[l + 1]);
            Array m = area_downsample2(s.mask_levels[l + 1]);
            for (long i = 0; i < m.numel(); ++i) m[i] = m[i] >= 1.0 ? 1.0 : 0.0;
            s.mask_levels[l] = m;
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace cds
