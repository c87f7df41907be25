#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glass/tensor_file.hpp"

namespace glass {

// One multi-object sample: channel-first float image in [0,1], optional
// semantic mask (int32, 0 = background), optional per-object instance masks
// (uint8 0/1), the set of class ids present, and an optional caption.
struct SampleRecord {
    std::string id;
    TensorFile image;                          // (3,H,W) float32
    std::optional<TensorFile> semantic_mask;   // (H,W) int32
    std::optional<TensorFile> instance_masks;  // (K,H,W) uint8
    std::vector<int> class_set;
    std::optional<std::string> caption;

    void validate() const;
};

struct DatasetManifest {
    std::string split;
    std::string provenance;  // "rendered" | "generated" | "external"
    std::vector<std::string> class_names;  // index 0 is background
    std::vector<SampleRecord> records;
};

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes tensors as individual GLTENSR1 files plus a manifest.json next to
// them. Returns the manifest path.
std::string write_dataset(const DatasetManifest& ds, const std::string& dir);
DatasetManifest read_dataset(const std::string& manifest_path);

}  // namespace glass
