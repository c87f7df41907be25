#include "glass/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace glass {

BackgroundMode background_mode_from_name(const std::string& s) {
    if (s == "solid") return BackgroundMode::solid;
    if (s == "gradient") return BackgroundMode::gradient;
    if (s == "textured-noise" || s == "textured_noise") return BackgroundMode::textured_noise;
    throw std::invalid_argument("unknown background mode '" + s + "'");
}

std::string background_mode_name(BackgroundMode m) {
    switch (m) {
        case BackgroundMode::solid: return "solid";
        case BackgroundMode::gradient: return "gradient";
        case BackgroundMode::textured_noise: return "textured-noise";
    }
    return "?";
}

void SceneSpec::validate() const {
    if (image_size < 16) throw std::invalid_argument("scene image_size must be >= 16");
    if (num_classes < 2) throw std::invalid_argument("scene num_classes must be >= 2");
    if (objects_min < 1) throw std::invalid_argument("objects_per_scene min must be >= 1");
    if (objects_max < objects_min) throw std::invalid_argument("objects_per_scene range is empty");
    if (num_classes > 10) throw std::invalid_argument("at most 10 classes supported");
}

std::vector<std::string> class_vocabulary(int num_classes) {
    static const char* names[] = {"square", "circle", "triangle", "cross", "star",
                                  "diamond", "ring", "bar", "hexagon", "arrow"};
    std::vector<std::string> out{"background"};
    for (int i = 0; i < num_classes; ++i) out.push_back(names[i]);
    return out;
}

namespace {

struct Rgb {
    double r, g, b;
};

// class-correlated base colors; jitter keeps shape as the reliable cue
const Rgb kBaseColors[] = {
    {0.85, 0.25, 0.25}, {0.25, 0.55, 0.85}, {0.30, 0.75, 0.35}, {0.90, 0.75, 0.25}, {0.65, 0.35, 0.80},
    {0.90, 0.50, 0.20}, {0.30, 0.80, 0.75}, {0.85, 0.45, 0.65}, {0.55, 0.55, 0.30}, {0.45, 0.45, 0.90},
};

// area of each shape in units of scale^2, used to size objects to the
// minimum-area constraint
const double kAreaFactor[] = {4.0, 3.14159, 1.62, 2.04, 1.12, 2.0, 2.36, 1.68, 2.60, 1.30};

struct ObjectGeom {
    int class_id = 0;  // 1-based
    double cx = 0, cy = 0, scale = 1, rot = 0;
    Rgb color{1, 1, 1};
};

bool point_in_shape(int shape, double u, double v) {
    switch (shape) {
        case 0:  // square
            return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        case 1:  // circle
            return u * u + v * v <= 1.0;
        case 2: {  // triangle, apex up
            if (v < -0.8 || v > 1.0) return false;
            double half = 0.9 * (v + 0.8) / 1.8;
            return std::abs(u) <= half;
        }
        case 3:  // cross
            return (std::abs(u) <= 0.34 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.34 && std::abs(u) <= 1.0);
        case 4: {  // 5-point star via polar radius threshold
            double rr = std::sqrt(u * u + v * v);
            if (rr > 1.0) return false;
            double ang = std::atan2(v, u);
            double k = std::fmod(ang * 5.0 / (2.0 * 3.14159265358979), 1.0);
            if (k < 0) k += 1.0;
            double spike = std::abs(k - 0.5) * 2.0;  // 0 at spike center, 1 between spikes
            double rmax = 0.42 + 0.58 * (1.0 - spike);
            return rr <= rmax;
        }
        case 5:  // diamond
            return std::abs(u) + std::abs(v) <= 1.0;
        case 6: {  // ring
            double rr = u * u + v * v;
            return rr <= 1.0 && rr >= 0.25;
        }
        case 7:  // bar
            return std::abs(u) <= 1.2 && std::abs(v) <= 0.35;
        case 8: {  // hexagon
            double au = std::abs(u), av = std::abs(v);
            return av <= 0.87 && 0.87 * au + 0.5 * av <= 0.87;
        }
        case 9:  // arrow, pointing +u
            if (u >= 0.0) return u <= 1.0 && std::abs(v) <= (1.0 - u) * 0.8;
            return u >= -1.0 && std::abs(v) <= 0.3;
    }
    return false;
}

std::vector<uint8_t> rasterize(const ObjectGeom& g, int64_t size) {
    std::vector<uint8_t> mask(static_cast<size_t>(size * size), 0);
    double c = std::cos(g.rot), s = std::sin(g.rot);
    int64_t lo_y = std::max<int64_t>(0, static_cast<int64_t>(g.cy - g.scale * 1.8));
    int64_t hi_y = std::min<int64_t>(size - 1, static_cast<int64_t>(g.cy + g.scale * 1.8));
    int64_t lo_x = std::max<int64_t>(0, static_cast<int64_t>(g.cx - g.scale * 1.8));
    int64_t hi_x = std::min<int64_t>(size - 1, static_cast<int64_t>(g.cx + g.scale * 1.8));
    for (int64_t y = lo_y; y <= hi_y; ++y)
        for (int64_t x = lo_x; x <= hi_x; ++x) {
            double dx = (static_cast<double>(x) + 0.5 - g.cx) / g.scale;
            double dy = (static_cast<double>(y) + 0.5 - g.cy) / g.scale;
            double u = c * dx + s * dy;
            double v = -s * dx + c * dy;
            if (point_in_shape(g.class_id - 1, u, v)) mask[static_cast<size_t>(y * size + x)] = 1;
        }
    return mask;
}

double muted(Rng& rng) { return rng.uniform(0.35, 0.65); }

void paint_background(Tensor& img, BackgroundMode mode, Rng& rng) {
    int64_t h = img.shape[1], w = img.shape[2];
    switch (mode) {
        case BackgroundMode::solid: {
            double r = muted(rng), g = muted(rng), b = muted(rng);
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x) {
                    img.at(0, y, x) = r;
                    img.at(1, y, x) = g;
                    img.at(2, y, x) = b;
                }
            break;
        }
        case BackgroundMode::gradient: {
            double r0 = muted(rng), g0 = muted(rng), b0 = muted(rng);
            double r1 = muted(rng), g1 = muted(rng), b1 = muted(rng);
            double ang = rng.uniform(0.0, 6.28318);
            double dx = std::cos(ang), dy = std::sin(ang);
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x) {
                    double t = ((static_cast<double>(x) / static_cast<double>(w - 1) - 0.5) * dx +
                                (static_cast<double>(y) / static_cast<double>(h - 1) - 0.5) * dy) +
                               0.5;
                    t = std::clamp(t, 0.0, 1.0);
                    img.at(0, y, x) = r0 + (r1 - r0) * t;
                    img.at(1, y, x) = g0 + (g1 - g0) * t;
                    img.at(2, y, x) = b0 + (b1 - b0) * t;
                }
            break;
        }
        case BackgroundMode::textured_noise: {
            // value noise: coarse random grid, bilinear-interpolated
            const int64_t cell = 8;
            int64_t gh = h / cell + 2, gw = w / cell + 2;
            std::vector<double> grid(static_cast<size_t>(gh * gw * 3));
            for (double& v : grid) v = muted(rng);
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x) {
                    double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
                    int64_t y0 = static_cast<int64_t>(fy), x0 = static_cast<int64_t>(fx);
                    double wy = fy - static_cast<double>(y0), wx = fx - static_cast<double>(x0);
                    for (int c = 0; c < 3; ++c) {
                        double v00 = grid[static_cast<size_t>((y0 * gw + x0) * 3 + c)];
                        double v01 = grid[static_cast<size_t>((y0 * gw + x0 + 1) * 3 + c)];
                        double v10 = grid[static_cast<size_t>(((y0 + 1) * gw + x0) * 3 + c)];
                        double v11 = grid[static_cast<size_t>(((y0 + 1) * gw + x0 + 1) * 3 + c)];
                        img.at(c, y, x) = (v00 * (1 - wx) + v01 * wx) * (1 - wy) + (v10 * (1 - wx) + v11 * wx) * wy;
                    }
                }
            break;
        }
    }
}

}  // namespace

SampleRecord render_scene(const SceneSpec& spec, Rng& rng, const std::string& record_id) {
    spec.validate();
    const int64_t size = spec.image_size;
    const double min_area_px = spec.min_area_frac * static_cast<double>(size * size);

    Tensor img{Shape{3, size, size}};
    paint_background(img, spec.background, rng);

    int64_t k = rng.uniform_int(spec.objects_min, spec.objects_max);

    std::vector<ObjectGeom> geoms;
    std::vector<std::vector<uint8_t>> masks;
    std::vector<uint8_t> occupied(static_cast<size_t>(size * size), 0);

    int64_t attempts = 0;
    const int64_t max_attempts = 500;
    while (static_cast<int64_t>(geoms.size()) < k && attempts < max_attempts) {
        ++attempts;
        ObjectGeom g;
        g.class_id = static_cast<int>(rng.uniform_int(1, spec.num_classes));
        double area_factor = kAreaFactor[g.class_id - 1];
        double s_min = std::sqrt(min_area_px / area_factor) * 1.12;  // margin for clipping/rotation loss
        double s_max = std::min(0.22 * static_cast<double>(size), s_min * 2.2);
        g.scale = rng.uniform(s_min, std::max(s_min, s_max));
        g.cx = rng.uniform(g.scale, static_cast<double>(size) - g.scale);
        g.cy = rng.uniform(g.scale, static_cast<double>(size) - g.scale);
        g.rot = rng.uniform(0.0, 6.28318);
        const Rgb& base = kBaseColors[g.class_id - 1];
        g.color = {std::clamp(base.r + rng.uniform(-0.15, 0.15), 0.05, 1.0),
                   std::clamp(base.g + rng.uniform(-0.15, 0.15), 0.05, 1.0),
                   std::clamp(base.b + rng.uniform(-0.15, 0.15), 0.05, 1.0)};

        std::vector<uint8_t> mask = rasterize(g, size);
        int64_t px_count = 0;
        for (uint8_t m : mask) px_count += m;
        if (static_cast<double>(px_count) < min_area_px) continue;

        if (!spec.occlusion_allowed) {
            bool overlaps = false;
            for (size_t i = 0; i < mask.size() && !overlaps; ++i)
                if (mask[i] && occupied[i]) overlaps = true;
            if (overlaps) continue;
        }
        for (size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) occupied[i] = 1;
        geoms.push_back(g);
        masks.push_back(std::move(mask));
    }
    if (static_cast<int64_t>(geoms.size()) < k)
        throw std::runtime_error("could not place " + std::to_string(k) + " non-overlapping objects in scene '" +
                                 record_id + "'");

    // paint in order; later objects occlude earlier ones
    std::vector<int32_t> semantic(static_cast<size_t>(size * size), 0);
    std::vector<int64_t> owner(static_cast<size_t>(size * size), -1);
    for (size_t oi = 0; oi < geoms.size(); ++oi) {
        const auto& g = geoms[oi];
        for (int64_t p = 0; p < size * size; ++p) {
            if (!masks[oi][static_cast<size_t>(p)]) continue;
            semantic[static_cast<size_t>(p)] = g.class_id;
            owner[static_cast<size_t>(p)] = static_cast<int64_t>(oi);
            int64_t y = p / size, x = p % size;
            img.at(0, y, x) = g.color.r;
            img.at(1, y, x) = g.color.g;
            img.at(2, y, x) = g.color.b;
        }
    }

    // visible (post-occlusion) instance masks; fully hidden objects drop out
    std::vector<std::vector<uint8_t>> visible;
    std::vector<int> visible_class;
    for (size_t oi = 0; oi < geoms.size(); ++oi) {
        std::vector<uint8_t> vm(static_cast<size_t>(size * size), 0);
        int64_t count = 0;
        for (int64_t p = 0; p < size * size; ++p)
            if (owner[static_cast<size_t>(p)] == static_cast<int64_t>(oi)) {
                vm[static_cast<size_t>(p)] = 1;
                ++count;
            }
        if (count > 0) {
            visible.push_back(std::move(vm));
            visible_class.push_back(geoms[oi].class_id);
        }
    }

    std::set<int> classes_present(semantic.begin(), semantic.end());
    classes_present.erase(0);

    auto vocab = class_vocabulary(spec.num_classes);
    std::ostringstream caption;
    caption << "a scene with ";
    size_t idx = 0;
    std::vector<int> class_list(classes_present.begin(), classes_present.end());
    for (int c : class_list) {
        if (idx > 0) caption << (idx + 1 == class_list.size() ? " and " : ", ");
        caption << vocab[static_cast<size_t>(c)];
        ++idx;
    }

    SampleRecord rec;
    rec.id = record_id;
    std::vector<float> img_f(img.data.begin(), img.data.end());
    rec.image = TensorFile::from_f32(img.shape, img_f, "image");
    rec.semantic_mask = TensorFile::from_i32({size, size}, semantic, "semantic");
    std::vector<uint8_t> inst_flat;
    for (const auto& vm : visible) inst_flat.insert(inst_flat.end(), vm.begin(), vm.end());
    rec.instance_masks =
        TensorFile::from_u8({static_cast<int64_t>(visible.size()), size, size}, inst_flat, "instances");
    rec.class_set = class_list;
    rec.caption = caption.str();
    return rec;
}

static bool word_in_caption(const std::string& caption, const std::string& word) {
    size_t pos = 0;
    auto is_word_char = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    while ((pos = caption.find(word, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(caption[pos - 1]);
        size_t end = pos + word.size();
        bool right_ok = end >= caption.size() || !is_word_char(caption[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

std::string PromptSpec::prompt_string(const std::vector<std::string>& class_names) const {
    std::string out = caption + ";";
    for (int c : class_set) out += " " + class_names.at(static_cast<size_t>(c));
    return out;
}

PromptSpec build_prompt(const SampleRecord& record, PromptMode mode, const std::vector<std::string>& class_names) {
    PromptSpec prompt;
    if (mode == PromptMode::glass) {
        if (!record.caption) throw PromptError("record '" + record.id + "' has no caption for glass mode");
        prompt.caption = *record.caption;
        for (size_t c = 1; c < class_names.size(); ++c)
            if (word_in_caption(prompt.caption, class_names[c])) prompt.class_set.push_back(static_cast<int>(c));
    } else {
        if (record.class_set.empty()) throw PromptError("record '" + record.id + "' has empty class_set");
        prompt.class_set = record.class_set;
        std::sort(prompt.class_set.begin(), prompt.class_set.end());
        std::string joined;
        for (int c : prompt.class_set) {
            if (!joined.empty()) joined += " ";
            joined += class_names.at(static_cast<size_t>(c));
        }
        prompt.caption = joined;
    }
    if (prompt.class_set.empty()) throw PromptError("no guidable classes in record '" + record.id + "'");
    return prompt;
}

std::string make_corpus(const SceneSpec& spec, int64_t n, const std::string& out_dir, const std::string& split) {
    if (n < 1) throw std::invalid_argument("make_corpus: n must be >= 1");
    spec.validate();
    SeedSeq seq(spec.seed);
    DatasetManifest ds;
    ds.split = split;
    ds.provenance = "rendered";
    ds.class_names = class_vocabulary(spec.num_classes);
    for (int64_t i = 0; i < n; ++i) {
        Rng rng = seq.stream(static_cast<uint64_t>(i));
        char id[32];
        std::snprintf(id, sizeof(id), "r%06lld", static_cast<long long>(i));
        ds.records.push_back(render_scene(spec, rng, id));
    }
    return write_dataset(ds, out_dir);
}

}  // namespace glass
