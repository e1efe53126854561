#include "ergo/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ergo/imaging.hpp"

namespace ergo::dataset {

namespace {

std::string resolve_image_path(const std::string& dataset_path, const std::string& image) {
    namespace fs = std::filesystem;
    fs::path p(image);
    if (p.is_absolute()) return image;
    return (fs::path(dataset_path).parent_path() / p).string();
}

} // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file: " + path);

    Dataset ds;
    std::set<std::string> seen_ids;
    std::vector<std::string> unreadable;
    std::string line;
    int line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DatasetError("line " + std::to_string(line_no) + ": not a JSON object");
        }
        for (const char* field : {"id", "image", "question", "answer"}) {
            if (!j.contains(field) || !j[field].is_string()) {
                throw DatasetError("line " + std::to_string(line_no) + ": missing or non-string '" +
                                   field + "'");
            }
        }

        Sample s;
        s.id = j["id"].get<std::string>();
        if (!seen_ids.insert(s.id).second) {
            throw DatasetError("line " + std::to_string(line_no) + ": duplicate sample id '" +
                               s.id + "'");
        }
        s.image_path = resolve_image_path(path, j["image"].get<std::string>());
        s.question = j["question"].get<std::string>();
        s.gt_answer = j["answer"].get<std::string>();

        if (j.contains("options")) {
            if (!j["options"].is_array()) {
                throw DatasetError("line " + std::to_string(line_no) + ": 'options' must be an array");
            }
            for (const auto& opt : j["options"]) {
                if (!opt.is_string()) {
                    throw DatasetError("line " + std::to_string(line_no) +
                                       ": 'options' entries must be strings");
                }
                s.options.push_back(opt.get<std::string>());
            }
        }

        try {
            s.image_space = imaging::probe_image_dims(s.image_path);
        } catch (const DecodeError&) {
            unreadable.push_back(s.id);
            ds.samples.push_back(std::move(s));
            continue;
        }

        if (j.contains("gt_boxes")) {
            if (!j["gt_boxes"].is_array()) {
                throw DatasetError("line " + std::to_string(line_no) + ": 'gt_boxes' must be an array");
            }
            for (const auto& box : j["gt_boxes"]) {
                if (!box.is_array() || box.size() != 4 || !box[0].is_number() ||
                    !box[1].is_number() || !box[2].is_number() || !box[3].is_number()) {
                    throw DatasetError("line " + std::to_string(line_no) +
                                       ": gt box must be [x1,y1,x2,y2] numbers");
                }
                const double x1 = box[0].get<double>();
                const double y1 = box[1].get<double>();
                const double x2 = box[2].get<double>();
                const double y2 = box[3].get<double>();
                const bool inside = x1 >= 0 && y1 >= 0 && x2 <= s.image_space.width &&
                                    y2 <= s.image_space.height;
                auto validated = geometry::clamp_and_validate(x1, y1, x2, y2, s.image_space);
                if (!validated) {
                    ds.warnings.push_back("sample '" + s.id + "': dropped degenerate gt box");
                    continue;
                }
                if (!inside) {
                    ds.warnings.push_back("sample '" + s.id + "': gt box clamped to image bounds");
                }
                s.gt_boxes.push_back(*validated);
            }
        }
        ds.samples.push_back(std::move(s));
    }

    if (!unreadable.empty()) {
        std::string ids;
        for (const std::string& id : unreadable) {
            if (!ids.empty()) ids += ", ";
            ids += id;
        }
        throw DatasetError("unreadable images for samples: " + ids);
    }
    return ds;
}

} // namespace ergo::dataset
