#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glass/tensor.hpp"

namespace glass {

// 8-bit RGB raster with just enough drawing for overlays, qualitative grids
// and scalar curves.
struct Canvas {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

    Canvas() = default;
    Canvas(int64_t w, int64_t h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255);

    void set(int64_t x, int64_t y, uint8_t r, uint8_t g, uint8_t b);
    void fill_rect(int64_t x0, int64_t y0, int64_t x1, int64_t y1, uint8_t r, uint8_t g, uint8_t b);
    void line(double x0, double y0, double x1, double y1, uint8_t r, uint8_t g, uint8_t b);
    // copies src into this canvas with top-left corner at (x, y)
    void blit(const Canvas& src, int64_t x, int64_t y);
};

// (3,H,W) float tensor in [0,1] -> canvas
Canvas canvas_from_image(const Tensor& image);
// integer label map (H,W) -> canvas via the class palette (0 = dark gray)
Canvas canvas_from_labels(const std::vector<int32_t>& labels, int64_t h, int64_t w);
// blends label colors over an image, alpha in [0,1]
Canvas overlay_labels(const Tensor& image, const std::vector<int32_t>& labels, double alpha);
// per-slot soft masks (O,H,W) -> hard argmax coloring
Canvas canvas_from_slot_masks(const Tensor& masks);

void palette_color(int32_t label, uint8_t& r, uint8_t& g, uint8_t& b);

Canvas upscale_nearest(const Canvas& src, int factor);
Canvas plot_curve(const std::vector<double>& xs, const std::vector<double>& ys, int64_t w = 640, int64_t h = 400);
Canvas compose_grid(const std::vector<std::vector<Canvas>>& rows, int64_t pad = 2);

// Deterministic PNG writer (zlib-compressed, RGB8).
void write_png(const Canvas& c, const std::string& path);

}  // namespace glass
