#include "routecast/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "routecast/error.hpp"

namespace routecast {

namespace {

float dist3(const float *a, const Rgb &b)
{
    const float d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

} // namespace

Rgb ColorScheme::gradient(float t) const
{
    t = std::clamp(t, 0.0f, 1.0f);
    Rgb c;
    for (int i = 0; i < 3; ++i)
        c[i] = gradient_low[i] + t * (gradient_high[i] - gradient_low[i]);
    return c;
}

float ColorScheme::min_flat_distance() const
{
    const Rgb flat[] = {white, lightblue, pink, lightyellow, black};
    float best = 1e9f;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j)
            best = std::min(best, dist3(flat[i].data(), flat[j]));
    return best;
}

PixelRect RasterLayout::tile_rect(int x, int y) const
{
    return {offset_y + (grid_h - 1 - y) * pitch(), offset_x + x * pitch(), px_per_tile, px_per_tile};
}

PixelRect RasterLayout::chanx_rect(int x, int y) const
{
    // Strip above tile row y, i.e. just above the top edge of its rect.
    const PixelRect t = tile_rect(x, y);
    return {t.y0 - channel_px, t.x0, channel_px, px_per_tile};
}

PixelRect RasterLayout::chany_rect(int x, int y) const
{
    const PixelRect t = tile_rect(x, y);
    return {t.y0, t.x0 + px_per_tile, px_per_tile, channel_px};
}

std::vector<PixelRect> RasterLayout::segment_rects() const
{
    std::vector<PixelRect> r;
    for (int y = 0; y <= rows(); ++y)
        for (int x = 1; x <= cols(); ++x)
            r.push_back(chanx_rect(x, y));
    for (int y = 1; y <= rows(); ++y)
        for (int x = 0; x <= cols(); ++x)
            r.push_back(chany_rect(x, y));
    return r;
}

std::vector<uint8_t> RasterLayout::channel_mask() const
{
    std::vector<uint8_t> m(static_cast<size_t>(w) * w, 0);
    for (const auto &r : segment_rects())
        for (int y = r.y0; y < r.y0 + r.h; ++y)
            for (int x = r.x0; x < r.x0 + r.w; ++x)
                m[static_cast<size_t>(y) * w + x] = 1;
    return m;
}

RasterLayout make_layout(const Floorplan &fp, int w, int px_per_tile, int channel_px)
{
    if (px_per_tile < 2)
        throw ValidationError("layout overflow: px_per_tile must be >= 2");
    if (channel_px < 1)
        throw ValidationError("layout overflow: channel_px must be >= 1");
    RasterLayout l;
    l.w = w;
    l.px_per_tile = px_per_tile;
    l.channel_px = channel_px;
    l.grid_w = fp.grid_width();
    l.grid_h = fp.grid_height();
    const int need_w = l.grid_w * px_per_tile + (l.grid_w - 1) * channel_px;
    const int need_h = l.grid_h * px_per_tile + (l.grid_h - 1) * channel_px;
    if (need_w > w || need_h > w)
        throw ValidationError("layout overflow: " + std::to_string(std::max(need_w, need_h)) + " px needed, w = " +
                              std::to_string(w));
    l.offset_x = (w - need_w) / 2;
    l.offset_y = (w - need_h) / 2;
    return l;
}

RasterLayout fit_layout(const Floorplan &fp, int w)
{
    const int g = std::max(fp.grid_width(), fp.grid_height());
    for (int px = w; px >= 2; --px) {
        const int ch = std::max(1, px / 2);
        if (g * px + (g - 1) * ch <= w)
            return make_layout(fp, w, px, ch);
    }
    throw ValidationError("layout overflow: floorplan does not fit w = " + std::to_string(w) + " with 2x2 tiles");
}

ImagePlane render_floorplan(const Floorplan &fp, const RasterLayout &layout, const ColorScheme &scheme)
{
    if (layout.grid_w != fp.grid_width() || layout.grid_h != fp.grid_height())
        throw ValidationError("layout does not match floorplan");
    ImagePlane img(layout.w, layout.w, 3, 1.0f);
    for (int y = 0; y < fp.grid_height(); ++y) {
        for (int x = 0; x < fp.grid_width(); ++x) {
            if (fp.site_capacity(x, y) == 0)
                continue;
            const Rgb *c = &scheme.lightblue;
            if (fp.kind(x, y) == TileKind::MEM)
                c = &scheme.lightyellow;
            else if (fp.kind(x, y) == TileKind::MULT)
                c = &scheme.pink;
            const PixelRect r = layout.tile_rect(x, y);
            img.fill_rect(r.y0, r.x0, r.h, r.w, c->data());
        }
    }
    return img;
}

ImagePlane render_placement(const Floorplan &fp, const Netlist &nl, const Placement &pl, const RasterLayout &layout,
                            const ColorScheme &scheme)
{
    ImagePlane img = render_floorplan(fp, layout, scheme);
    std::vector<int> used(static_cast<size_t>(fp.grid_width()) * fp.grid_height(), 0);
    for (int b = 0; b < nl.num_blocks() && b < static_cast<int>(pl.loc.size()); ++b)
        ++used[pl.loc[b].y * fp.grid_width() + pl.loc[b].x];
    for (int y = 0; y < fp.grid_height(); ++y) {
        for (int x = 0; x < fp.grid_width(); ++x) {
            const int k = used[y * fp.grid_width() + x];
            if (k == 0)
                continue;
            const PixelRect r = layout.tile_rect(x, y);
            if (fp.kind(x, y) != TileKind::IO) {
                img.fill_rect(r.y0, r.x0, r.h, r.w, scheme.black.data());
                continue;
            }
            // Pads fill k / ports of their area, row-major from the top-left.
            const int area = r.h * r.w;
            const int ports = fp.spec().io_ports_per_pad;
            const int n = static_cast<int>((static_cast<long long>(area) * std::min(k, ports) * 2 + ports) / (2 * ports));
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < 3; ++c)
                    img.at(r.y0 + i / r.w, r.x0 + i % r.w, c) = scheme.black[c];
        }
    }
    return img;
}

ImagePlane render_connectivity(const Netlist &nl, const Placement &pl, const RasterLayout &layout,
                               float line_intensity)
{
    ImagePlane img(layout.w, layout.w, 1, 0.0f);
    auto center = [&](int b) {
        const PixelRect r = layout.tile_rect(pl.loc[b].x, pl.loc[b].y);
        return std::pair<int, int>{r.y0 + r.h / 2, r.x0 + r.w / 2};
    };
    for (const auto &net : nl.nets()) {
        const auto [ya, xa] = center(net.driver);
        for (int s : net.sinks) {
            auto [y1, x1] = center(s);
            if (y1 == ya && x1 == xa)
                continue;
            // Bresenham; every pixel of one line is visited once.
            int x = xa, y = ya;
            const int dx = std::abs(x1 - x), sx = x < x1 ? 1 : -1;
            const int dy = -std::abs(y1 - y), sy = y < y1 ? 1 : -1;
            int err = dx + dy;
            while (true) {
                img.at(y, x, 0) += line_intensity;
                if (x == x1 && y == y1)
                    break;
                const int e2 = 2 * err;
                if (e2 >= dy) {
                    err += dy;
                    x += sx;
                }
                if (e2 <= dx) {
                    err += dx;
                    y += sy;
                }
            }
        }
    }
    for (float &v : img.data())
        v = std::min(v, 1.0f);
    return img;
}

ImagePlane render_heatmap(const ChannelUtilization &u, const ImagePlane &base, const RasterLayout &layout,
                          const ColorScheme &scheme)
{
    if (base.height() != layout.w || base.width() != layout.w || base.channels() != 3)
        throw ValidationError("heatmap base image does not match layout");
    if (u.cols != layout.cols() || u.rows != layout.rows())
        throw ValidationError("utilization dims do not match layout");
    ImagePlane img = base;
    const auto rects = layout.segment_rects();
    const auto vals = u.flat();
    for (size_t i = 0; i < rects.size(); ++i) {
        if (!(vals[i] > 0.0f))
            continue;
        const Rgb c = scheme.gradient(vals[i]);
        img.fill_rect(rects[i].y0, rects[i].x0, rects[i].h, rects[i].w, c.data());
    }
    return img;
}

HeatmapDecode decode_heatmap_detailed(const ImagePlane &img, const RasterLayout &layout, const ColorScheme &scheme)
{
    if (img.height() != layout.w || img.width() != layout.w || img.channels() < 3)
        throw ValidationError("heatmap image does not match layout");
    Rgb d;
    float dd = 0.0f;
    for (int i = 0; i < 3; ++i) {
        d[i] = scheme.gradient_high[i] - scheme.gradient_low[i];
        dd += d[i] * d[i];
    }
    HeatmapDecode out;
    out.util = ChannelUtilization(layout.cols(), layout.rows());
    const auto rects = layout.segment_rects();
    out.residual.resize(rects.size());
    std::vector<float> vals(rects.size());
    for (size_t i = 0; i < rects.size(); ++i) {
        const PixelRect &r = rects[i];
        double acc[3] = {0, 0, 0};
        for (int y = r.y0; y < r.y0 + r.h; ++y)
            for (int x = r.x0; x < r.x0 + r.w; ++x)
                for (int c = 0; c < 3; ++c)
                    acc[c] += img.at(y, x, c);
        const double n = static_cast<double>(r.h) * r.w;
        const float p[3] = {float(acc[0] / n), float(acc[1] / n), float(acc[2] / n)};
        float t = 0.0f;
        for (int c = 0; c < 3; ++c)
            t += (p[c] - scheme.gradient_low[c]) * d[c];
        t = std::clamp(t / dd, 0.0f, 1.0f);
        const Rgb q = scheme.gradient(t);
        const float on_gradient = dist3(p, q);
        const float to_white = dist3(p, scheme.white);
        if (to_white < on_gradient) {
            vals[i] = 0.0f;
            out.residual[i] = to_white;
        } else {
            vals[i] = t;
            out.residual[i] = on_gradient;
        }
    }
    std::copy(vals.begin(), vals.begin() + out.util.chanx.size(), out.util.chanx.begin());
    std::copy(vals.begin() + out.util.chanx.size(), vals.end(), out.util.chany.begin());
    return out;
}

ChannelUtilization decode_heatmap(const ImagePlane &img, const RasterLayout &layout, const ColorScheme &scheme)
{
    return decode_heatmap_detailed(img, layout, scheme).util;
}

ImagePlane stack_input(const ImagePlane &place, const ImagePlane &connect, float lambda)
{
    if (place.height() != connect.height() || place.width() != connect.width())
        throw ValidationError("stack_input: image dims differ");
    if ((place.channels() != 3 && place.channels() != 1) || connect.channels() != 1)
        throw ValidationError("stack_input: expected 3- or 1-channel placement and 1-channel connectivity");
    const int pc = place.channels();
    ImagePlane out(place.height(), place.width(), pc + 1);
    for (int y = 0; y < place.height(); ++y)
        for (int x = 0; x < place.width(); ++x) {
            for (int c = 0; c < pc; ++c)
                out.at(y, x, c) = std::clamp(place.at(y, x, c), 0.0f, 1.0f);
            out.at(y, x, pc) = std::clamp(lambda * connect.at(y, x, 0), 0.0f, 1.0f);
        }
    return out;
}

ImagePlane to_grayscale(const ImagePlane &rgb)
{
    if (rgb.channels() != 3)
        throw ValidationError("to_grayscale: expected 3 channels");
    ImagePlane out(rgb.height(), rgb.width(), 1);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x)
            out.at(y, x, 0) = 0.299f * rgb.at(y, x, 0) + 0.587f * rgb.at(y, x, 1) + 0.114f * rgb.at(y, x, 2);
    return out;
}

} // namespace routecast
