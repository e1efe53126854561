#pragma once

#include <string>
#include <vector>

#include "ergo/errors.hpp"
#include "ergo/geometry.hpp"

namespace ergo::dataset {

/// One VQA sample. gt_boxes are in original-image coordinates and have been
/// clamped/validated against the actual image dimensions at load time.
struct Sample {
    std::string id;
    std::string image_path;
    std::string question;
    std::string gt_answer;
    std::vector<std::string> options;
    std::vector<geometry::BBox> gt_boxes;
    geometry::CoordSpace image_space;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> warnings;
};

/// Loads a JSON-Lines dataset:
///   {"id":.., "image":.., "question":.., "answer":.., "options":[..]?, "gt_boxes":[[x1,y1,x2,y2],..]?}
/// Relative image paths resolve against the dataset file's directory.
/// Schema violations raise DatasetError with the line number; duplicate ids
/// and unreadable images are collected and reported by id. GT boxes that
/// stick out of the image are clamped with a warning; degenerate ones are
/// dropped with a warning.
Dataset load_dataset(const std::string& path);

} // namespace ergo::dataset
