#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "fpfgnn/pipeline.hpp"

namespace fpfgnn {

namespace {

// Pixel index range [lo, hi) whose centres fall inside [a, b) along one axis.
std::pair<int, int> pixel_span(double a, double b, int n) {
  const int lo = std::clamp(static_cast<int>(std::ceil(a * n - 0.5)), 0, n);
  const int hi = std::clamp(static_cast<int>(std::ceil(b * n - 0.5)), 0, n);
  return {lo, std::max(lo, hi)};
}

}  // namespace

LayoutRaster rasterize_layout(const std::vector<BBox>& boxes, const std::vector<RoomType>& types,
                              const RectPolygon& boundary, Canvas canvas, bool fill_gaps) {
  if (boxes.size() != types.size()) throw std::invalid_argument("boxes and room types differ in length");
  const int W = canvas.width, H = canvas.height;
  const BoundaryMask mask = rasterize_polygon(boundary, W, H);
  LayoutRaster r{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H, kUnlabeled)};
  for (int row = 0; row < H; ++row)
    for (int col = 0; col < W; ++col)
      if (!mask.at(row, col)) r.labels[static_cast<std::size_t>(row) * W + col] = kExternalLabel;

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].area() > boxes[b].area(); });
  for (std::size_t i : order) {
    const auto [c0, c1] = pixel_span(boxes[i].x_min, boxes[i].x_max, W);
    const auto [r0, r1] = pixel_span(boxes[i].y_min, boxes[i].y_max, H);
    const auto label = static_cast<std::uint8_t>(types[i]);
    for (int row = r0; row < r1; ++row)
      for (int col = c0; col < c1; ++col)
        if (mask.at(row, col)) r.labels[static_cast<std::size_t>(row) * W + col] = label;
  }

  if (fill_gaps && !boxes.empty()) {
    for (int row = 0; row < H; ++row)
      for (int col = 0; col < W; ++col) {
        std::uint8_t& px = r.labels[static_cast<std::size_t>(row) * W + col];
        if (px != kUnlabeled) continue;
        const double x = (col + 0.5) / W, y = (row + 0.5) / H;
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
          const double dx = boxes[i].center_x() - x, dy = boxes[i].center_y() - y;
          const double d = dx * dx + dy * dy;
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        px = static_cast<std::uint8_t>(types[best]);
      }
  }
  return r;
}

std::vector<int> run_length_encode(const LayoutRaster& r) {
  std::vector<int> runs;
  for (std::size_t i = 0; i < r.labels.size();) {
    std::size_t j = i;
    while (j < r.labels.size() && r.labels[j] == r.labels[i]) ++j;
    runs.push_back(r.labels[i]);
    runs.push_back(static_cast<int>(j - i));
    i = j;
  }
  return runs;
}

LayoutRaster run_length_decode(const std::vector<int>& runs, int width, int height) {
  if (runs.size() % 2) throw std::invalid_argument("run-length data must come in (label, count) pairs");
  LayoutRaster r{width, height, {}};
  r.labels.reserve(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < runs.size(); i += 2) {
    if (runs[i] < 0 || runs[i] > 255 || runs[i + 1] < 0) throw std::invalid_argument("invalid run");
    r.labels.insert(r.labels.end(), static_cast<std::size_t>(runs[i + 1]), static_cast<std::uint8_t>(runs[i]));
  }
  if (r.labels.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("run lengths do not cover the raster");
  return r;
}

void write_png(const LayoutRaster& r, const std::string& path) {
  static constexpr std::uint8_t kPalette[kRoomTypeCount][3] = {
      {238, 232, 170}, {255, 165, 0},   {240, 128, 128}, {135, 206, 235}, {222, 184, 135},
      {152, 251, 152}, {221, 160, 221}, {255, 215, 0},   {189, 183, 107}, {127, 255, 212},
      {244, 164, 96},  {176, 196, 222}, {210, 180, 140}, {255, 255, 255}, {64, 64, 64}};
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("PNG encoding failed for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(r.width) * 3);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const std::uint8_t l = r.at(y, x);
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x) * 3 + c] = l < kRoomTypeCount ? kPalette[l][c] : png_byte{128};
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace fpfgnn
