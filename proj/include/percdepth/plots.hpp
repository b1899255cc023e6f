#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "percdepth/tensor.hpp"

// Static PNG outputs: loss curves from metrics.csv and sample triptychs.
namespace percdepth::plots {

namespace fs = std::filesystem;

struct Series {
  std::string name;
  std::vector<double> values;
};

// Reads every numeric column except `step` from a metrics CSV.
std::vector<Series> read_metrics(const fs::path& csv);

// One panel per series, stacked top to bottom in column order, each scaled to
// its own min / max. Returns false (writing nothing) when there are no rows.
bool plot_loss_curves(const std::vector<Series>& series, const fs::path& png,
                      int panel_width = 480, int panel_height = 96);

struct Triptych {
  Tensor rgb;    // [1,3,h,w] in [0, 255]
  Tensor pred;   // [1,1,h,w] physical depth
  Tensor truth;  // [1,1,h,w] physical depth
};

// Rows of input | predicted depth | ground truth; both depth columns share the
// gray ramp [lo, hi]. Image width is 3 * tile width.
Tensor triptych_grid(const std::vector<Triptych>& rows, double lo, double hi);

// Writes loss_curves.png next to the CSV (or into `out_dir`). Returns the
// number of plot files written; 0 with a warning on stderr for an empty CSV.
int emit_plots(const fs::path& metrics_csv, const fs::path& out_dir);

}  // namespace percdepth::plots
