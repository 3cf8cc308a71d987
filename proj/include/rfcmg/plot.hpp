// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal raster plots written as PNG: sample grids, bar charts and line
// charts with a built-in 5x7 pixel font. Plots are outputs for people, not
// interfaces; nothing reads them back.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rfcmg/common.hpp"

namespace rfcmg::plot {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

class Image {
public:
    Image(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return w_; }
    int height() const { return h_; }
    void set(int x, int y, Rgb c);
    Rgb at(int x, int y) const;
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    /// Upper-case glyph rendering; unknown characters draw as blanks.
    void text(int x, int y, const std::string& s, Rgb c, int scale = 1);
    const std::vector<std::uint8_t>& pixels() const { return px_; }

private:
    int w_, h_;
    std::vector<std::uint8_t> px_;
};

void write_png(const std::filesystem::path& path, const Image& img);

/// Grayscale tiles, `cols` per row, each pixel scaled by `zoom`. Values are
/// mapped from [lo, hi]; with lo == hi each tile uses its own min/max.
Image image_grid(const std::vector<Plane>& tiles, int cols, int zoom, double lo = -1.0,
                 double hi = 1.0, const std::string& title = "");

Image bar_chart(const std::string& title, const std::vector<std::string>& labels,
                const std::vector<double>& values);

struct Series {
    std::string name;
    std::vector<double> x, y;
};

Image line_chart(const std::string& title, const std::string& x_label,
                 const std::vector<Series>& series);

}  // namespace rfcmg::plot
