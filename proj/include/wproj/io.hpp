#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wproj/measure.hpp"
#include "wproj/types.hpp"

namespace wproj {

enum class Transform { Identity, Log };

/// Columns to read from a CSV file. An empty `columns` list selects every
/// column of the header except the weight column, all with Identity.
struct CsvSchema {
  std::vector<std::string> columns;
  std::vector<Transform> transforms;  // empty or one per column
  std::optional<std::string> weight_column;
};

/// Samples read from one CSV file before they become a measure.
struct CsvTable {
  std::vector<std::string> columns;
  Matrix samples;
  std::optional<Vector> weights;  // raw, unnormalised
  long rows_read = 0;
  long dropped_missing = 0;      // empty / NA / NaN in a declared column
  long dropped_nonpositive = 0;  // nonpositive value in a log column
};

/// Parses a comma-separated file with a header row. Fields may be quoted.
/// Rows with a missing value in any declared column are dropped and counted;
/// so are rows with nonpositive values in a log column. Throws MissingColumn,
/// ParseError (with the line number), AllRowsDropped or Io.
CsvTable read_csv(const std::string& path, const CsvSchema& schema);

/// read_csv followed by from_samples / from_weighted_samples.
DiscreteMeasure load_csv(const std::string& path, const CsvSchema& schema);

/// Builds a measure from an already parsed table.
DiscreteMeasure table_to_measure(const CsvTable& table);

/// Writes `header` and one row per atom: coordinates then weight.
void write_measure_csv(const std::string& path, const DiscreteMeasure& m, const std::vector<std::string>& names);

/// Grayscale image with intensities in [0, 1], row-major.
using Image = Matrix;

/// Reads PGM (P2/P5, 8 or 16 bit) or PNG (any bit depth and colour type).
/// Colour is reduced to luminance; an alpha channel multiplies the
/// intensity, so transparent pixels carry no mass. Throws ImageFormat or Io.
Image read_image(const std::string& path);

enum class ImageEncoding { Pgm8, Pgm16, Png8, Png16 };

/// Writes `image` clamped to [0, 1].
void write_image(const std::string& path, const Image& image, ImageEncoding encoding);

/// Averages non-overlapping factor x factor blocks (partial edge blocks are
/// averaged over the pixels they contain).
Image downsample(const Image& image, int factor);

/// Atoms at (row, col) for every positive pixel in row-major order, with
/// intensity-proportional weights. Throws AllZeroImage.
DiscreteMeasure image_to_measure(const Image& image);

/// Nearest-pixel accumulation of the atoms' masses on an h x w grid; atoms
/// outside the grid go to the closest border pixel, so mass is preserved.
Image render_measure(const DiscreteMeasure& m, Index height, Index width);

}  // namespace wproj
