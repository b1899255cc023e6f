#include "percdepth/plots.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "percdepth/io.hpp"

namespace percdepth::plots {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

void put(Tensor& img, int y, int x, const std::array<Real, 3>& c) {
  if (y < 0 || x < 0 || y >= img.h() || x >= img.w()) return;
  for (int ch = 0; ch < 3; ++ch) img.at(0, ch, y, x) = c[ch];
}

// Bresenham segment.
void line(Tensor& img, int x0, int y0, int x1, int y1, const std::array<Real, 3>& c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, y0, x0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

constexpr std::array<std::array<Real, 3>, 6> kColors{{
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};

}  // namespace

std::vector<Series> read_metrics(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<Series> out;
  std::vector<int> columns;
  const auto header = split(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "step") continue;
    out.push_back({header[i], {}});
    columns.push_back(static_cast<int>(i));
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(csv.string(), static_cast<std::size_t>(in.tellg()),
                       "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells");
    }
    for (std::size_t s = 0; s < out.size(); ++s) out[s].values.push_back(std::stod(cells[columns[s]]));
  }
  return out;
}

bool plot_loss_curves(const std::vector<Series>& series, const fs::path& png, int panel_width,
                      int panel_height) {
  if (series.empty() || series.front().values.empty()) return false;
  const int margin = 6;
  const int ph = panel_height, pw = panel_width;
  Tensor img(1, 3, static_cast<int>(series.size()) * (ph + margin) + margin, pw + 2 * margin, 255);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& v = series[s].values;
    const int top = margin + static_cast<int>(s) * (ph + margin);
    const std::array<Real, 3> frame{180, 180, 180};
    line(img, margin, top, margin + pw - 1, top, frame);
    line(img, margin, top + ph - 1, margin + pw - 1, top + ph - 1, frame);
    line(img, margin, top, margin, top + ph - 1, frame);
    line(img, margin + pw - 1, top, margin + pw - 1, top + ph - 1, frame);
    double lo = 1e300, hi = -1e300;
    for (double x : v)
      if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
    if (!(lo <= hi)) continue;
    if (hi - lo < 1e-12) hi = lo + 1, lo -= 1;
    // Zero line when it is inside the range.
    if (lo < 0 && hi > 0) {
      const int zy = top + ph - 2 - static_cast<int>(std::lround(-lo / (hi - lo) * (ph - 3)));
      for (int x = margin + 1; x < margin + pw - 1; x += 3) put(img, zy, x, frame);
    }
    auto px = [&](std::size_t i) {
      return margin + 1 +
             (v.size() == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(i) / (v.size() - 1) * (pw - 3))));
    };
    auto py = [&](double x) {
      return top + ph - 2 - static_cast<int>(std::lround((x - lo) / (hi - lo) * (ph - 3)));
    };
    const auto& color = kColors[s % kColors.size()];
    for (std::size_t i = 0; i + 1 < v.size(); ++i) line(img, px(i), py(v[i]), px(i + 1), py(v[i + 1]), color);
    if (v.size() == 1) put(img, py(v[0]), px(0), color);
  }
  io::write_png(png, img);
  return true;
}

Tensor triptych_grid(const std::vector<Triptych>& rows, double lo, double hi) {
  if (rows.empty()) throw ShapeError("triptych_grid needs at least one row");
  if (!(lo < hi)) throw ParameterError("triptych_grid: need lo < hi");
  const int th = rows[0].rgb.h(), tw = rows[0].rgb.w();
  Tensor grid(1, 3, th * static_cast<int>(rows.size()), 3 * tw);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.rgb.shape() != Shape{1, 3, th, tw} || row.pred.shape() != Shape{1, 1, th, tw} ||
        row.truth.shape() != Shape{1, 1, th, tw}) {
      throw ShapeError("triptych rows must share one tile size");
    }
    const int y0 = static_cast<int>(r) * th;
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) {
        for (int c = 0; c < 3; ++c) grid.at(0, c, y0 + y, x) = row.rgb.at(0, c, y, x);
        auto gray = [&](Real v) {
          return static_cast<Real>(255.0 * std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
        };
        const Real p = gray(row.pred.at(0, 0, y, x)), t = gray(row.truth.at(0, 0, y, x));
        for (int c = 0; c < 3; ++c) {
          grid.at(0, c, y0 + y, tw + x) = p;
          grid.at(0, c, y0 + y, 2 * tw + x) = t;
        }
      }
  }
  return grid;
}

int emit_plots(const fs::path& metrics_csv, const fs::path& out_dir) {
  const auto series = read_metrics(metrics_csv);
  const fs::path target = out_dir / "loss_curves.png";
  if (!plot_loss_curves(series, target)) {
    std::cerr << "warning: " << metrics_csv.string() << " has no rows; no plot written\n";
    return 0;
  }
  return 1;
}

}  // namespace percdepth::plots
