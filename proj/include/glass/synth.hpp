#pragma once

#include <string>
#include <vector>

#include "glass/dataset.hpp"
#include "glass/rng.hpp"

namespace glass {

enum class BackgroundMode { solid, gradient, textured_noise };

BackgroundMode background_mode_from_name(const std::string& s);
std::string background_mode_name(BackgroundMode m);

struct SceneSpec {
    int64_t image_size = 64;
    int num_classes = 5;        // foreground classes, ids 1..num_classes
    int objects_min = 1;
    int objects_max = 4;
    BackgroundMode background = BackgroundMode::gradient;
    bool occlusion_allowed = true;
    double min_area_frac = 0.03;
    uint64_t seed = 0;

    void validate() const;
};

struct PromptSpec {
    std::string caption;
    std::vector<int> class_set;

    // P = [caption; classes]
    std::string prompt_string(const std::vector<std::string>& class_names) const;
};

enum class PromptMode { glass, glass_dagger };

// class-id -> display name; index 0 is "background"
std::vector<std::string> class_vocabulary(int num_classes);

SampleRecord render_scene(const SceneSpec& spec, Rng& rng, const std::string& record_id = "scene");

struct PromptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// glass: classes whose names occur as whole words in the caption;
// glass_dagger: the record's ground-truth class set, caption rebuilt from it.
PromptSpec build_prompt(const SampleRecord& record, PromptMode mode, const std::vector<std::string>& class_names);

// Renders n scenes with per-record rng substreams and persists them.
// Returns the manifest path.
std::string make_corpus(const SceneSpec& spec, int64_t n, const std::string& out_dir,
                        const std::string& split = "train");

}  // namespace glass
