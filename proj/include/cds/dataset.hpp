#pragma once

#include <string>
#include <vector>

#include "cds/synth.hpp"
#include "cds/training.hpp"

namespace cds {

/// On-disk scene: images/NNNN.png, cams/NNNN_cam.txt, depths/NNNN.pfm
/// (optional ground truth), pair.txt.
struct DatasetScene {
    std::vector<InputView> views;
    std::vector<Array> gt_depths; // empty when the scene ships without GT
    std::vector<std::vector<int>> pairs;
    bool has_gt() const { return !gt_depths.empty(); }
};

void write_scene_dataset(const Scene& scene, const std::string& dir);
DatasetScene read_scene_dataset(const std::string& dir);

/// Scene subdirectories of a dataset root, sorted by name.
std::vector<std::string> list_scene_dirs(const std::string& root);

std::vector<TrainSample> samples_from_dataset(const DatasetScene& scene, int max_srcs = 8);

} // namespace cds
