#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace wproj::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "wproj-test-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_samples_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& samples,
                       const std::optional<Vector>& weights) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < samples.rows(); ++i) {
    for (Index k = 0; k < samples.cols(); ++k) out << (k ? "," : "") << samples(i, k);
    if (weights) out << ',' << (*weights)[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path);
}

DiscreteMeasure random_uniform_measure(Rng& rng, Index n, Index d, double spread) {
  return from_samples(spread * standard_normal(rng, n, d));
}

DiscreteMeasure random_weighted_measure(Rng& rng, Index n, Index d) {
  Matrix x = standard_normal(rng, n, d);
  Vector w(n);
  for (Index i = 0; i < n; ++i) w[i] = 0.05 + rng.uniform();
  return from_weighted_samples(x, w);
}

Vector random_simplex(Rng& rng, Index j) {
  Vector v(j);
  for (Index k = 0; k < j; ++k) v[k] = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

double grid_search_min(const Eigen::MatrixXd& g, double step) {
  const Index j = g.rows();
  const long steps = std::lround(1.0 / step);
  double best = std::numeric_limits<double>::infinity();
  Vector l(j);
  if (j == 1) return g(0, 0);
  if (j == 2) {
    for (long a = 0; a <= steps; ++a) {
      l << a * step, 1.0 - a * step;
      best = std::min(best, l.dot(g * l));
    }
    return best;
  }
  if (j != 3) throw std::invalid_argument("grid search supports J <= 3");
  for (long a = 0; a <= steps; ++a) {
    for (long b = 0; a + b <= steps; ++b) {
      l << a * step, b * step, 1.0 - (a + b) * step;
      best = std::min(best, l.dot(g * l));
    }
  }
  return best;
}

double sorted_quantile_cost(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

PanelFixture mixture_panel(const fs::path& dir, Index n, std::uint64_t seed) {
  PanelFixture f;
  PanelConfig& c = f.config;
  c.treated = "T";
  c.controls = {"C1", "C2"};
  c.pre_periods = {"2001", "2002", "2003"};
  c.post_periods = {"2004", "2005"};
  c.schema.columns = {"y1", "y2"};
  c.path_template = (dir / "{unit}_{period}.csv").string();
  c.seed = seed;
  f.planted = Vector::Constant(2, 0.5);

  const double m = 2.0;
  auto draw = [](Rng& rng, double centre, double drift) {
    // Correlated 2-D Gaussian: y2 = 0.5 y1 + sqrt(0.75) z.
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    return Eigen::RowVector2d(centre + drift + z1, centre + drift + 0.5 * z1 + std::sqrt(0.75) * z2);
  };
  std::vector<std::string> periods = c.pre_periods;
  periods.insert(periods.end(), c.post_periods.begin(), c.post_periods.end());
  for (std::size_t t = 0; t < periods.size(); ++t) {
    const double drift = 0.1 * static_cast<double>(t);
    for (int u = 0; u < 3; ++u) {
      Rng rng = Rng::stream(seed, 100 * static_cast<std::uint64_t>(u) + t);
      Matrix x(n, 2);
      for (Index i = 0; i < n; ++i) {
        double centre = 0.0;
        if (u == 1) centre = -m;
        else if (u == 2) centre = m;
        else centre = i < n / 2 ? -m : m;
        x.row(i) = draw(rng, centre, drift);
      }
      const std::string unit = u == 0 ? "T" : c.controls[static_cast<std::size_t>(u - 1)];
      write_samples_csv(c.path_for(unit, periods[t]), {"y1", "y2"}, x);
    }
  }
  return f;
}

namespace {

struct SurveyParams {
  double p_caid;
  double p_emp;
  double mu_hours;
  double mu_wage;
};

std::string survey_row(Rng& rng, const SurveyParams& p, bool blank_wage) {
  const int caid = rng.uniform() < p.p_caid ? 2 : 1;
  const double r = rng.uniform();
  const int emp = r < p.p_emp ? 1 : (r < p.p_emp + 0.5 * (1.0 - p.p_emp) ? 2 : 3);
  const double log_hours = emp == 1 ? p.mu_hours + 0.25 * rng.normal() : std::log(10.0) + 0.5 * rng.normal();
  const long hours = std::max(1L, std::lround(std::exp(log_hours)));
  const long wage =
      std::max(1L, std::lround(std::exp(p.mu_wage + 0.6 * rng.normal() + 0.5 * (std::log(hours) - p.mu_hours))));
  const long weight = 50 + static_cast<long>(rng.below(101));
  std::ostringstream row;
  row << caid << ',' << emp << ',' << hours << ',';
  if (blank_wage) row << "NA";
  else row << wage;
  row << ',' << weight << '\n';
  return row.str();
}

}  // namespace

PanelFixture medicaid_panel(const fs::path& dir, Index n, std::uint64_t seed) {
  PanelFixture f;
  PanelConfig& c = f.config;
  c.treated = "MT";
  for (int k = 1; k <= 12; ++k) c.controls.push_back((k < 10 ? "S0" : "S") + std::to_string(k));
  c.pre_periods = {"2010", "2011", "2012", "2013"};
  c.post_periods = {"2014", "2015"};
  c.schema.columns = {"HINSCAID", "EMPSTAT", "UHRSWORK", "INCWAGE"};
  c.schema.transforms = {Transform::Identity, Transform::Identity, Transform::Log, Transform::Log};
  c.schema.weight_column = "PERWT";
  c.path_template = (dir / "{unit}_{period}.csv").string();
  c.fit_sample_size = 1500;
  c.seed = seed;

  std::vector<SurveyParams> params;
  for (int k = 0; k < 5; ++k) {
    params.push_back({0.15 + 0.05 * k, 0.80 - 0.04 * k, std::log(38.0) + 0.05 * (k - 2), 10.2 + 0.15 * (k - 2)});
  }
  for (int k = 0; k < 7; ++k) params.push_back({0.03, 0.95, std::log(38.0) + 0.4, 11.5 + 0.1 * k});
  const std::vector<double> mix{0.3, 0.25, 0.2, 0.15, 0.1};
  f.planted = Vector::Zero(12);
  for (int k = 0; k < 5; ++k) f.planted[k] = mix[static_cast<std::size_t>(k)];

  std::vector<std::string> periods = c.pre_periods;
  periods.insert(periods.end(), c.post_periods.begin(), c.post_periods.end());
  for (std::size_t t = 0; t < periods.size(); ++t) {
    for (std::size_t u = 0; u <= c.controls.size(); ++u) {
      Rng rng = Rng::stream(seed, 1000 * u + t);
      std::string text = "HINSCAID,EMPSTAT,UHRSWORK,INCWAGE,PERWT\n";
      for (Index i = 0; i < n; ++i) {
        SurveyParams p;
        if (u == 0) {
          double r = rng.uniform();
          std::size_t k = 0;
          while (k + 1 < mix.size() && r >= mix[k]) r -= mix[k++];
          p = params[k];
        } else {
          p = params[u - 1];
        }
        p.mu_wage += 0.03 * static_cast<double>(t);
        text += survey_row(rng, p, i % 200 == 199);
      }
      const std::string unit = u == 0 ? c.treated : c.controls[u - 1];
      write_text(c.path_for(unit, periods[t]), text);
    }
  }
  return f;
}

Image disc_image(Index h, Index w, double row, double col, double radius, double value) {
  Image img = Image::Zero(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double dr = static_cast<double>(r) - row;
      const double dc = static_cast<double>(c) - col;
      if (dr * dr + dc * dc <= radius * radius) img(r, c) = value;
    }
  }
  return img;
}

Image square_image(Index h, Index w, Index row, Index col, Index side, double value) {
  Image img = Image::Zero(h, w);
  img.block(row, col, side, side).setConstant(value);
  return img;
}

ImageFixture lookalike_images(const fs::path& dir) {
  constexpr Index kSize = 32;
  ImageFixture f;
  f.target = (dir / "target.pgm").string();
  write_image(f.target, disc_image(kSize, kSize, 16, 16, 7), ImageEncoding::Pgm8);
  // Translates by (-2,-2), (-2,2) and (3,0) average to the target with weights (0.3, 0.3, 0.4). No two of them
  // do, so swapping one for the target leaves it as the only exact match.
  const double shifts[4][3] = {{14, 14, 7}, {14, 18, 7}, {19, 16, 7}, {16, 16, 8}};
  for (int k = 0; k < 4; ++k) {
    const std::string path = (dir / ("lookalike_" + std::to_string(k) + ".png")).string();
    write_image(path, disc_image(kSize, kSize, shifts[k][0], shifts[k][1], shifts[k][2]), ImageEncoding::Png8);
    f.controls.push_back(path);
    f.decoy.push_back(false);
  }
  f.replaceable = 2;
  const Index corners[5][2] = {{0, 0}, {0, 27}, {27, 0}, {27, 27}, {0, 14}};
  for (int k = 0; k < 5; ++k) {
    const std::string path = (dir / ("decoy_" + std::to_string(k) + ".pgm")).string();
    write_image(path, square_image(kSize, kSize, corners[k][0], corners[k][1], 5), ImageEncoding::Pgm16);
    f.controls.push_back(path);
    f.decoy.push_back(true);
  }
  return f;
}

}  // namespace wproj::testing
