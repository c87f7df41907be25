#include "glass/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace glass {

Canvas::Canvas(int64_t w, int64_t h, uint8_t r, uint8_t g, uint8_t b) : width(w), height(h) {
    rgb.resize(static_cast<size_t>(w * h * 3));
    for (int64_t i = 0; i < w * h; ++i) {
        rgb[static_cast<size_t>(i * 3)] = r;
        rgb[static_cast<size_t>(i * 3 + 1)] = g;
        rgb[static_cast<size_t>(i * 3 + 2)] = b;
    }
}

void Canvas::set(int64_t x, int64_t y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    size_t i = static_cast<size_t>((y * width + x) * 3);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void Canvas::fill_rect(int64_t x0, int64_t y0, int64_t x1, int64_t y1, uint8_t r, uint8_t g, uint8_t b) {
    for (int64_t y = std::max<int64_t>(0, y0); y < std::min(height, y1); ++y)
        for (int64_t x = std::max<int64_t>(0, x0); x < std::min(width, x1); ++x) set(x, y, r, g, b);
}

void Canvas::line(double x0, double y0, double x1, double y1, uint8_t r, uint8_t g, uint8_t b) {
    double dx = x1 - x0, dy = y1 - y0;
    int64_t steps = static_cast<int64_t>(std::max(std::abs(dx), std::abs(dy))) + 1;
    for (int64_t i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(steps);
        set(static_cast<int64_t>(std::lround(x0 + t * dx)), static_cast<int64_t>(std::lround(y0 + t * dy)), r, g, b);
    }
}

void Canvas::blit(const Canvas& src, int64_t x, int64_t y) {
    for (int64_t sy = 0; sy < src.height; ++sy)
        for (int64_t sx = 0; sx < src.width; ++sx) {
            size_t i = static_cast<size_t>((sy * src.width + sx) * 3);
            set(x + sx, y + sy, src.rgb[i], src.rgb[i + 1], src.rgb[i + 2]);
        }
}

static uint8_t to_byte(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Canvas canvas_from_image(const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3)
        throw std::invalid_argument("canvas_from_image: expected (3,H,W), got " + shape_str(image.shape));
    int64_t h = image.shape[1], w = image.shape[2];
    Canvas c(w, h);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            c.set(x, y, to_byte(image.at(0, y, x)), to_byte(image.at(1, y, x)), to_byte(image.at(2, y, x)));
    return c;
}

void palette_color(int32_t label, uint8_t& r, uint8_t& g, uint8_t& b) {
    static const uint8_t table[][3] = {
        {40, 40, 40},    // background
        {230, 60, 60},   {60, 160, 230}, {70, 200, 90},  {240, 190, 60}, {180, 90, 220},
        {250, 130, 40},  {70, 220, 210}, {230, 110, 180}, {150, 150, 80}, {110, 110, 250},
    };
    int idx = label < 0 ? 0 : label % 11;
    r = table[idx][0];
    g = table[idx][1];
    b = table[idx][2];
}

Canvas canvas_from_labels(const std::vector<int32_t>& labels, int64_t h, int64_t w) {
    Canvas c(w, h);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            uint8_t r, g, b;
            palette_color(labels[static_cast<size_t>(y * w + x)], r, g, b);
            c.set(x, y, r, g, b);
        }
    return c;
}

Canvas overlay_labels(const Tensor& image, const std::vector<int32_t>& labels, double alpha) {
    Canvas base = canvas_from_image(image);
    for (int64_t i = 0; i < base.width * base.height; ++i) {
        int32_t lab = labels[static_cast<size_t>(i)];
        if (lab == 0) continue;
        uint8_t r, g, b;
        palette_color(lab, r, g, b);
        size_t off = static_cast<size_t>(i * 3);
        base.rgb[off] = static_cast<uint8_t>((1.0 - alpha) * base.rgb[off] + alpha * r);
        base.rgb[off + 1] = static_cast<uint8_t>((1.0 - alpha) * base.rgb[off + 1] + alpha * g);
        base.rgb[off + 2] = static_cast<uint8_t>((1.0 - alpha) * base.rgb[off + 2] + alpha * b);
    }
    return base;
}

Canvas canvas_from_slot_masks(const Tensor& masks) {
    if (masks.rank() != 3) throw std::invalid_argument("canvas_from_slot_masks: expected (O,H,W)");
    int64_t o_cnt = masks.shape[0], h = masks.shape[1], w = masks.shape[2];
    std::vector<int32_t> labels(static_cast<size_t>(h * w), 0);
    for (int64_t p = 0; p < h * w; ++p) {
        int64_t best = 0;
        double bv = masks.data[static_cast<size_t>(p)];
        for (int64_t o = 1; o < o_cnt; ++o) {
            double v = masks.data[static_cast<size_t>(o * h * w + p)];
            if (v > bv) {
                bv = v;
                best = o;
            }
        }
        labels[static_cast<size_t>(p)] = static_cast<int32_t>(best + 1);
    }
    return canvas_from_labels(labels, h, w);
}

Canvas upscale_nearest(const Canvas& src, int factor) {
    Canvas out(src.width * factor, src.height * factor);
    for (int64_t y = 0; y < out.height; ++y)
        for (int64_t x = 0; x < out.width; ++x) {
            size_t i = static_cast<size_t>(((y / factor) * src.width + (x / factor)) * 3);
            out.set(x, y, src.rgb[i], src.rgb[i + 1], src.rgb[i + 2]);
        }
    return out;
}

Canvas plot_curve(const std::vector<double>& xs, const std::vector<double>& ys, int64_t w, int64_t h) {
    if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("plot_curve: empty or mismatched series");
    Canvas c(w, h);
    const int64_t ml = 48, mr = 12, mt = 12, mb = 28;  // margins
    double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
    for (size_t i = 0; i < xs.size(); ++i) {
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
        ymin = std::min(ymin, ys[i]);
        ymax = std::max(ymax, ys[i]);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * static_cast<double>(w - ml - mr); };
    auto py = [&](double y) { return (h - mb) - (y - ymin) / (ymax - ymin) * static_cast<double>(h - mt - mb); };
    // frame and gridlines
    c.line(ml, mt, ml, h - mb, 120, 120, 120);
    c.line(ml, h - mb, w - mr, h - mb, 120, 120, 120);
    for (int i = 1; i <= 4; ++i) {
        int64_t gy = mt + i * (h - mt - mb) / 5;
        for (int64_t x = ml; x < w - mr; x += 4) c.set(x, gy, 220, 220, 220);
    }
    for (size_t i = 1; i < xs.size(); ++i)
        c.line(px(xs[i - 1]), py(ys[i - 1]), px(xs[i]), py(ys[i]), 200, 60, 40);
    return c;
}

Canvas compose_grid(const std::vector<std::vector<Canvas>>& rows, int64_t pad) {
    int64_t total_h = pad, total_w = 0;
    for (const auto& row : rows) {
        int64_t rh = 0, rw = pad;
        for (const auto& cell : row) {
            rh = std::max(rh, cell.height);
            rw += cell.width + pad;
        }
        total_h += rh + pad;
        total_w = std::max(total_w, rw);
    }
    Canvas out(total_w, total_h, 255, 255, 255);
    int64_t y = pad;
    for (const auto& row : rows) {
        int64_t x = pad, rh = 0;
        for (const auto& cell : row) {
            out.blit(cell, x, y);
            x += cell.width + pad;
            rh = std::max(rh, cell.height);
        }
        y += rh + pad;
    }
    return out;
}

// ------------------------------------------------------------- PNG writing --

static void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>(v & 0xff));
}

static void write_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, crc);
}

void write_png(const Canvas& c, const std::string& path) {
    if (c.width <= 0 || c.height <= 0) throw std::invalid_argument("write_png: empty canvas");
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(c.height * (1 + c.width * 3)));
    for (int64_t y = 0; y < c.height; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = c.rgb.data() + y * c.width * 3;
        raw.insert(raw.end(), row, row + c.width * 3);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(c.width));
    put_u32_be(ihdr, static_cast<uint32_t>(c.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_png: cannot open '" + path + "'");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw std::runtime_error("write_png: write failed for '" + path + "'");
}

}  // namespace glass
