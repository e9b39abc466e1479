#pragma once

#include <array>
#include <vector>

#include "routecast/arch.hpp"
#include "routecast/image.hpp"
#include "routecast/netlist.hpp"
#include "routecast/placer.hpp"
#include "routecast/router.hpp"

namespace routecast {

using Rgb = std::array<float, 3>;

struct ColorScheme {
    Rgb white{1.0f, 1.0f, 1.0f};
    Rgb lightblue{0.678f, 0.847f, 0.902f};
    Rgb pink{1.0f, 0.753f, 0.796f};
    // More saturated than the X11 "lightyellow" (1, 1, 0.878), which sits only
    // 0.12 from white and would break the distinguishability bound below.
    Rgb lightyellow{1.0f, 1.0f, 0.6f};
    Rgb black{0.0f, 0.0f, 0.0f};
    Rgb gradient_low{1.0f, 1.0f, 0.0f};
    Rgb gradient_high{0.502f, 0.0f, 0.502f};

    // Linear yellow-to-purple map, t clamped to [0, 1].
    Rgb gradient(float t) const;
    // Smallest pairwise RGB distance among the five flat colors.
    float min_flat_distance() const;
};

struct PixelRect {
    int y0 = 0, x0 = 0, h = 0, w = 0;
    bool contains(int y, int x) const { return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w; }
};

// Tile-to-pixel mapping. Tiles are px_per_tile squares separated by
// channel_px strips, centered in a w x w image; tile row 0 is at the bottom.
struct RasterLayout {
    int w = 256;
    int px_per_tile = 2;
    int channel_px = 1;
    int grid_w = 0;
    int grid_h = 0;
    int offset_x = 0;
    int offset_y = 0;

    int cols() const { return grid_w - 2; }
    int rows() const { return grid_h - 2; }
    int pitch() const { return px_per_tile + channel_px; }
    PixelRect tile_rect(int x, int y) const;
    PixelRect chanx_rect(int x, int y) const;
    PixelRect chany_rect(int x, int y) const;
    // Segment strips in routing-graph segment order.
    std::vector<PixelRect> segment_rects() const;
    // 1 on channel-strip pixels (pixels owned by some segment), else 0.
    std::vector<uint8_t> channel_mask() const;

    bool operator==(const RasterLayout &) const = default;
};

// Throws ValidationError("layout overflow ...") if the grid does not fit w
// or a tile would be smaller than 2x2.
RasterLayout make_layout(const Floorplan &fp, int w, int px_per_tile, int channel_px);
// Largest tiles that fit w, with channel strips half a tile wide (>= 1 px).
RasterLayout fit_layout(const Floorplan &fp, int w);

ImagePlane render_floorplan(const Floorplan &fp, const RasterLayout &layout, const ColorScheme &scheme = {});
ImagePlane render_placement(const Floorplan &fp, const Netlist &nl, const Placement &pl, const RasterLayout &layout,
                            const ColorScheme &scheme = {});

// Per-line intensity added along each driver-to-sink edge.
inline constexpr float kConnectLineIntensity = 0.5f;

// Additive 1-px lines between tile centers, clamped to [0, 1]. One channel.
ImagePlane render_connectivity(const Netlist &nl, const Placement &pl, const RasterLayout &layout,
                               float line_intensity = kConnectLineIntensity);

// Colors strips of used segments (u > 0) over `base`; u is clamped to 1.
ImagePlane render_heatmap(const ChannelUtilization &u, const ImagePlane &base, const RasterLayout &layout,
                          const ColorScheme &scheme = {});

struct HeatmapDecode {
    ChannelUtilization util;
    // Per segment (segment order): distance from the strip's mean color to
    // the decoded color; large values flag off-gradient strips.
    std::vector<float> residual;
};

HeatmapDecode decode_heatmap_detailed(const ImagePlane &img, const RasterLayout &layout,
                                      const ColorScheme &scheme = {});
ChannelUtilization decode_heatmap(const ImagePlane &img, const RasterLayout &layout, const ColorScheme &scheme = {});

// [R, G, B, lambda * connect], clamped to [0, 1]. Accepts a 1-channel
// placement image too (grayscale ablation), giving 2 channels.
ImagePlane stack_input(const ImagePlane &place, const ImagePlane &connect, float lambda);

// 0.299 R + 0.587 G + 0.114 B.
ImagePlane to_grayscale(const ImagePlane &rgb);

} // namespace routecast
