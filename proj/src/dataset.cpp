#include "glass/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>

namespace glass {

namespace fs = std::filesystem;
using nlohmann::json;

void SampleRecord::validate() const {
    if (id.empty()) throw DatasetError("record has empty id");
    if (image.dtype != Dtype::f32 || image.shape.size() != 3 || image.shape[0] != 3)
        throw DatasetError("record '" + id + "': image must be (3,H,W) float32, got " + shape_str(image.shape));
    if (semantic_mask) {
        if (semantic_mask->dtype != Dtype::i32 || semantic_mask->shape.size() != 2)
            throw DatasetError("record '" + id + "': semantic mask must be (H,W) int32");
        std::set<int> allowed(class_set.begin(), class_set.end());
        for (int32_t v : semantic_mask->as_i32())
            if (v != 0 && !allowed.count(v))
                throw DatasetError("record '" + id + "': mask label " + std::to_string(v) + " not in class_set");
    }
    if (instance_masks && (instance_masks->dtype != Dtype::u8 || instance_masks->shape.size() != 3))
        throw DatasetError("record '" + id + "': instance masks must be (K,H,W) uint8");
}

std::string write_dataset(const DatasetManifest& ds, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DatasetError("cannot create dataset dir '" + dir + "': " + ec.message());

    std::set<std::string> seen;
    json records = json::array();
    for (const auto& rec : ds.records) {
        rec.validate();
        if (!seen.insert(rec.id).second) throw DatasetError("duplicate record id '" + rec.id + "'");

        json r;
        r["id"] = rec.id;
        std::string img_rel = rec.id + "_image.gt";
        write_tensor(rec.image, (fs::path(dir) / img_rel).string());
        r["image"] = img_rel;
        if (rec.semantic_mask) {
            std::string rel = rec.id + "_semantic.gt";
            write_tensor(*rec.semantic_mask, (fs::path(dir) / rel).string());
            r["semantic_mask"] = rel;
        } else {
            r["semantic_mask"] = nullptr;
        }
        if (rec.instance_masks) {
            std::string rel = rec.id + "_instances.gt";
            write_tensor(*rec.instance_masks, (fs::path(dir) / rel).string());
            r["instance_masks"] = rel;
        } else {
            r["instance_masks"] = nullptr;
        }
        r["class_set"] = rec.class_set;
        if (rec.caption)
            r["caption"] = *rec.caption;
        else
            r["caption"] = nullptr;
        records.push_back(std::move(r));
    }

    json manifest;
    manifest["format"] = "glass-dataset-v1";
    manifest["split"] = ds.split;
    manifest["provenance"] = ds.provenance;
    manifest["class_names"] = ds.class_names;
    manifest["records"] = std::move(records);

    std::string path = (fs::path(dir) / "manifest.json").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DatasetError("cannot write manifest '" + path + "'");
    os << manifest.dump(2) << "\n";
    return path;
}

DatasetManifest read_dataset(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw DatasetError("cannot open manifest '" + manifest_path + "'");
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw DatasetError("manifest '" + manifest_path + "' is not valid JSON: " + e.what());
    }
    if (manifest.value("format", "") != "glass-dataset-v1")
        throw DatasetError("manifest '" + manifest_path + "' has unknown format tag");

    fs::path base = fs::path(manifest_path).parent_path();
    DatasetManifest ds;
    ds.split = manifest.value("split", "");
    ds.provenance = manifest.value("provenance", "");
    ds.class_names = manifest.value("class_names", std::vector<std::string>{});
    for (const auto& r : manifest.at("records")) {
        SampleRecord rec;
        rec.id = r.at("id").get<std::string>();
        rec.image = read_tensor((base / r.at("image").get<std::string>()).string());
        if (!r.at("semantic_mask").is_null())
            rec.semantic_mask = read_tensor((base / r.at("semantic_mask").get<std::string>()).string());
        if (!r.at("instance_masks").is_null())
            rec.instance_masks = read_tensor((base / r.at("instance_masks").get<std::string>()).string());
        rec.class_set = r.at("class_set").get<std::vector<int>>();
        if (!r.at("caption").is_null()) rec.caption = r.at("caption").get<std::string>();
        rec.validate();
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace glass
