// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include <png.h>

namespace rfcmg::plot {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
    static const std::map<char, Glyph> f = {
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
        {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
        {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
        {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
        {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
        {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
        {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
        {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
        {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
        {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
        {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
        {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    };
    return f;
}

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{220, 220, 220};
constexpr std::array<Rgb, 6> kPalette = {
    Rgb{31, 119, 180}, Rgb{214, 39, 40}, Rgb{44, 160, 44},
    Rgb{255, 127, 14}, Rgb{148, 103, 189}, Rgb{23, 190, 207}};

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int text_width(const std::string& s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }

struct Frame {
    int left = 70, right = 20, top = 34, bottom = 56;
    int w = 640, h = 400;
    int x0() const { return left; }
    int x1() const { return w - right; }
    int y0() const { return h - bottom; }  // bottom edge of the plot area
    int y1() const { return top; }
};

void axes(Image& img, const Frame& f, double ymin, double ymax, const std::string& title) {
    img.text((f.w - text_width(title, 2)) / 2, 8, title, kBlack, 2);
    for (int k = 0; k <= 4; ++k) {
        const double v = ymin + (ymax - ymin) * k / 4.0;
        const int y = f.y0() - (f.y0() - f.y1()) * k / 4;
        img.line(f.x0(), y, f.x1(), y, kGrid);
        const auto s = tick(v);
        img.text(f.x0() - 6 - text_width(s), y - 3, s, kBlack);
    }
    img.line(f.x0(), f.y0(), f.x1(), f.y0(), kBlack);
    img.line(f.x0(), f.y0(), f.x0(), f.y1(), kBlack);
}

std::pair<double, double> padded_range(std::vector<double> v, bool include_zero) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return {0.0, 1.0};
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    if (include_zero) lo = std::min(lo, 0.0), hi = std::max(hi, 0.0);
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.08 * (hi - lo);
    return {include_zero && lo == 0.0 ? 0.0 : lo - pad, hi + pad};
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : w_(width), h_(height) {
    require(width > 0 && height > 0, "image size must be positive");
    px_.resize(static_cast<std::size_t>(w_) * h_ * 3);
    for (std::size_t i = 0; i < px_.size(); i += 3) {
        px_[i] = fill.r;
        px_[i + 1] = fill.g;
        px_[i + 2] = fill.b;
    }
}

void Image::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
}

Rgb Image::at(int x, int y) const {
    const auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    return {p[0], p[1], p[2]};
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) set(x, y, c);
    }
}

void Image::line(int x0, int y0, int x1, int y1, Rgb c) {
    // Bresenham
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) err += dy, x0 += sx;
        if (e2 <= dx) err += dx, y0 += sy;
    }
}

void Image::text(int x, int y, const std::string& s, Rgb c, int scale) {
    const auto& f = font();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
        const auto it = f.find(ch);
        if (it == f.end()) continue;
        const int ox = x + static_cast<int>(i) * 6 * scale;
        for (int row = 0; row < 7; ++row) {
            for (int col = 0; col < 5; ++col) {
                if (it->second[row] & (0x10 >> col)) {
                    fill_rect(ox + col * scale, y + row * scale, ox + (col + 1) * scale - 1,
                              y + (row + 1) * scale - 1, c);
                }
            }
        }
    }
}

void write_png(const std::filesystem::path& path, const Image& img) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw InvalidArgument("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw InvalidArgument("libpng failed while writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto& px = img.pixels();
    for (int y = 0; y < img.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(&px[static_cast<std::size_t>(y) * img.width() * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

Image image_grid(const std::vector<Plane>& tiles, int cols, int zoom, double lo, double hi,
                 const std::string& title) {
    require(!tiles.empty() && cols >= 1 && zoom >= 1, "grid needs tiles, columns and zoom");
    const int th = static_cast<int>(tiles[0].rows()) * zoom;
    const int tw = static_cast<int>(tiles[0].cols()) * zoom;
    const int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
    const int gap = 4, top = title.empty() ? gap : 14;
    const int width = std::max(cols * (tw + gap) + gap, text_width(title) + 2 * gap);
    Image img(width, top + rows * (th + gap), Rgb{255, 255, 255});
    if (!title.empty()) img.text(gap, 4, title, kBlack);
    for (std::size_t k = 0; k < tiles.size(); ++k) {
        const Plane& t = tiles[k];
        double a = lo, b = hi;
        if (lo == hi) {
            a = t.minCoeff();
            b = t.maxCoeff();
            if (b - a < 1e-12) b = a + 1.0;
        }
        const int ox = gap + static_cast<int>(k % cols) * (tw + gap);
        const int oy = top + static_cast<int>(k / cols) * (th + gap);
        for (int y = 0; y < th; ++y) {
            for (int x = 0; x < tw; ++x) {
                const double v = std::clamp((t(y / zoom, x / zoom) - a) / (b - a), 0.0, 1.0);
                const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
                img.set(ox + x, oy + y, Rgb{g, g, g});
            }
        }
    }
    return img;
}

Image bar_chart(const std::string& title, const std::vector<std::string>& labels,
                const std::vector<double>& values) {
    require(labels.size() == values.size() && !values.empty(), "one label per bar");
    Frame f;
    Image img(f.w, f.h);
    const auto [ymin, ymax] = padded_range(values, true);
    axes(img, f, ymin, ymax, title);
    const int n = static_cast<int>(values.size());
    const int slot = (f.x1() - f.x0()) / n;
    const auto ypix = [&](double v) {
        return f.y0() - static_cast<int>(std::lround((v - ymin) / (ymax - ymin) * (f.y0() - f.y1())));
    };
    for (int i = 0; i < n; ++i) {
        const int cx = f.x0() + slot * i + slot / 2;
        const int half = std::max(2, slot / 3);
        if (std::isfinite(values[i])) {
            img.fill_rect(cx - half, ypix(values[i]), cx + half, ypix(std::max(ymin, 0.0)),
                          kPalette[i % kPalette.size()]);
            const auto s = tick(values[i]);
            img.text(cx - text_width(s) / 2, ypix(values[i]) - 10, s, kBlack);
        }
        img.text(cx - text_width(labels[i]) / 2, f.y0() + 8 + 12 * (i % 2), labels[i], kBlack);
    }
    return img;
}

Image line_chart(const std::string& title, const std::string& x_label,
                 const std::vector<Series>& series) {
    require(!series.empty(), "line chart needs a series");
    std::vector<double> xs, ys;
    for (const auto& s : series) {
        require(s.x.size() == s.y.size() && !s.x.empty(), "series needs matching x and y");
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
    }
    Frame f;
    Image img(f.w, f.h);
    const auto [ymin, ymax] = padded_range(ys, false);
    auto [xmin, xmax] = padded_range(xs, false);
    axes(img, f, ymin, ymax, title);
    const auto px = [&](double x) {
        return f.x0() + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (f.x1() - f.x0())));
    };
    const auto py = [&](double y) {
        return f.y0() - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (f.y0() - f.y1())));
    };
    for (double x : series[0].x) {
        const auto s = tick(x);
        img.line(px(x), f.y0(), px(x), f.y0() + 4, kBlack);
        img.text(px(x) - text_width(s) / 2, f.y0() + 8, s, kBlack);
    }
    img.text((f.w - text_width(x_label)) / 2, f.h - 16, x_label, kBlack);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Rgb c = kPalette[k % kPalette.size()];
        const auto& s = series[k];
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            img.fill_rect(px(s.x[i]) - 2, py(s.y[i]) - 2, px(s.x[i]) + 2, py(s.y[i]) + 2, c);
            if (i + 1 < s.x.size() && std::isfinite(s.y[i + 1])) {
                img.line(px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), c);
            }
        }
        const int ly = f.y1() + 4 + 12 * static_cast<int>(k);
        img.fill_rect(f.x1() - 120, ly, f.x1() - 112, ly + 6, c);
        img.text(f.x1() - 106, ly, s.name, kBlack);
    }
    return img;
}

}  // namespace rfcmg::plot
