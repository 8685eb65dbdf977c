#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wproj/io.hpp"
#include "wproj/measure.hpp"
#include "wproj/rng.hpp"
#include "wproj/synthctl.hpp"

namespace wproj::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Writes `samples` under `header`, one row per sample; `weights`, when
/// given, becomes the last column.
void write_samples_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& samples,
                       const std::optional<Vector>& weights = std::nullopt);

DiscreteMeasure random_uniform_measure(Rng& rng, Index n, Index d, double spread = 1.0);
/// Strictly positive random weights.
DiscreteMeasure random_weighted_measure(Rng& rng, Index n, Index d);

/// Uniform random point of the simplex (normalised exponentials).
Vector random_simplex(Rng& rng, Index j);

/// Quadratic loss over the simplex minimised on a grid of the given step
/// (J <= 3): the QP oracle.
double grid_search_min(const Eigen::MatrixXd& g, double step);

/// W2^2 of two uniform 1-D samples of equal size via sorted matching.
double sorted_quantile_cost(std::vector<double> a, std::vector<double> b);

struct PanelFixture {
  PanelConfig config;
  Vector planted;  // known mixing weights, when the construction has them
};

/// Two 2-D Gaussian controls at -m and +m per coordinate; the treated
/// unit's samples are n/2 draws from each control's distribution. A common
/// drift shifts every unit by 0.1 per period.
PanelFixture mixture_panel(const std::filesystem::path& dir, Index n, std::uint64_t seed);

/// Twelve controls with survey-like outcomes (HINSCAID, EMPSTAT, UHRSWORK,
/// INCWAGE, weight column PERWT; hours and wages enter in logs). Controls
/// 1-5 bracket the treated unit's parameters; controls 6-12 are shifted far
/// from it.
PanelFixture medicaid_panel(const std::filesystem::path& dir, Index n, std::uint64_t seed);

/// Antialiasing-free disc of the given radius (pixels inside get `value`).
Image disc_image(Index h, Index w, double row, double col, double radius, double value = 1.0);
/// Filled axis-aligned square.
Image square_image(Index h, Index w, Index row, Index col, Index side, double value = 1.0);

/// Ten control images: five discs around the target disc (lookalikes) and
/// five corner squares (decoys). Files go to dir; returns target + controls.
struct ImageFixture {
  std::string target;
  std::vector<std::string> controls;
  std::vector<bool> decoy;
  std::size_t replaceable = 0;  // lookalike whose removal leaves the target unreachable
};
ImageFixture lookalike_images(const std::filesystem::path& dir);

}  // namespace wproj::testing
