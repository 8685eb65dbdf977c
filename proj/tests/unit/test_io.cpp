#include <gtest/gtest.h>

#include <png.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "wproj/error.hpp"
#include "wproj/io.hpp"

namespace wproj {
namespace {

using testing::TempDir;
using testing::write_text;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Config;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(LoadCsv, UniformWeightsWithoutWeightColumn) {
  TempDir dir;
  write_text(dir.file("a.csv"), "a,b\n1,2\n3,4\n5,6\n");
  const auto m = load_csv(dir.file("a.csv"), {{"a", "b"}, {}, std::nullopt});
  ASSERT_EQ(m.size(), 3);
  ASSERT_EQ(m.dim(), 2);
  for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(m.weights()[i], 1.0 / 3.0);
  EXPECT_EQ(m.support()(2, 1), 6.0);
}

TEST(LoadCsv, WeightColumnIsNormalised) {
  TempDir dir;
  write_text(dir.file("w.csv"), "x,w\n0,2\n1,2\n2,4\n");
  const auto m = load_csv(dir.file("w.csv"), {{"x"}, {}, "w"});
  ASSERT_EQ(m.size(), 3);
  EXPECT_DOUBLE_EQ(m.weights()[0], 0.25);
  EXPECT_DOUBLE_EQ(m.weights()[1], 0.25);
  EXPECT_DOUBLE_EQ(m.weights()[2], 0.5);
}

TEST(LoadCsv, SurveySchemaWithLogTransforms) {
  TempDir dir;
  // Rows 3 and 7 are dropped: a missing EMPSTAT and a zero in a log column.
  write_text(dir.file("s.csv"),
             "YEAR,HINSCAID,EMPSTAT,UHRSWORK,INCWAGE,PERWT\n"
             "2010,1,1,40,30000,120\n"
             "2010,2,1,35,25000,80\n"
             "2010,2,NA,30,20000,70\n"
             "2010,1,2,20,12000,100\n"
             "2010,2,1,50,60000,90\n"
             "2010,1,1,45,41000,110\n"
             "2010,1,3,0,0,50\n");
  CsvSchema schema{{"HINSCAID", "EMPSTAT", "UHRSWORK", "INCWAGE"},
                   {Transform::Identity, Transform::Identity, Transform::Log, Transform::Log},
                   "PERWT"};
  const CsvTable table = read_csv(dir.file("s.csv"), schema);
  EXPECT_EQ(table.rows_read, 7);
  EXPECT_EQ(table.dropped_missing, 1);
  EXPECT_EQ(table.dropped_nonpositive, 1);
  const auto m = table_to_measure(table);
  ASSERT_EQ(m.size(), 5);
  ASSERT_EQ(m.dim(), 4);
  // Computed independently (Python math.log and exact weight ratios).
  const double expected[5][5] = {
      {1.0, 1.0, 3.6888794541139363, 10.308952660644293, 0.24},
      {2.0, 1.0, 3.5553480614894135, 10.126631103850338, 0.16},
      {1.0, 2.0, 2.9957322735539909, 9.3926619287701367, 0.20},
      {2.0, 1.0, 3.912023005428146, 11.002099841204238, 0.18},
      {1.0, 1.0, 3.8066624897703196, 10.621327345686446, 0.22},
  };
  for (Index i = 0; i < 5; ++i) {
    for (Index k = 0; k < 4; ++k) EXPECT_NEAR(m.support()(i, k), expected[i][k], 1e-14);
    EXPECT_NEAR(m.weights()[i], expected[i][4], 1e-15);
  }
}

TEST(LoadCsv, AllColumnsWhenNoneDeclared) {
  TempDir dir;
  write_text(dir.file("a.csv"), "p, q ,w\n1,2,1\n3,4,3\n");
  const CsvTable t = read_csv(dir.file("a.csv"), {{}, {}, "w"});
  EXPECT_EQ(t.columns, (std::vector<std::string>{"p", "q"}));
  EXPECT_EQ(t.samples.cols(), 2);
}

TEST(LoadCsv, QuotedFieldsAndCrlf) {
  TempDir dir;
  write_text(dir.file("q.csv"), "\"name, full\",x\r\n\"a, \"\"b\"\"\",1.5\r\n\"c\",-2e3\r\n");
  const CsvTable t = read_csv(dir.file("q.csv"), {{"x"}, {}, std::nullopt});
  ASSERT_EQ(t.samples.rows(), 2);
  EXPECT_EQ(t.samples(0, 0), 1.5);
  EXPECT_EQ(t.samples(1, 0), -2000.0);
}

TEST(LoadCsv, MissingMarkersAreDropped) {
  TempDir dir;
  write_text(dir.file("m.csv"), "x\n1\n\nNA\nNaN\n.\n2\n");
  const CsvTable t = read_csv(dir.file("m.csv"), {{"x"}, {}, std::nullopt});
  EXPECT_EQ(t.samples.rows(), 2);
  EXPECT_EQ(t.dropped_missing, 3);
}

TEST(LoadCsv, Errors) {
  TempDir dir;
  write_text(dir.file("a.csv"), "a,b\n1,2\n");
  EXPECT_EQ(code_of([&] { load_csv(dir.file("a.csv"), {{"c"}, {}, std::nullopt}); }), ErrorCode::MissingColumn);
  EXPECT_EQ(code_of([&] { load_csv(dir.file("a.csv"), {{"a"}, {}, "w"}); }), ErrorCode::MissingColumn);
  EXPECT_EQ(code_of([&] { load_csv(dir.file("none.csv"), {}); }), ErrorCode::Io);

  write_text(dir.file("bad.csv"), "a,b\n1,2\n3,x\n");
  EXPECT_EQ(code_of([&] { load_csv(dir.file("bad.csv"), {}); }), ErrorCode::ParseError);
  EXPECT_NE(message_of([&] { load_csv(dir.file("bad.csv"), {}); }).find("line 3"), std::string::npos);

  write_text(dir.file("ragged.csv"), "a,b\n1,2\n3\n");
  EXPECT_NE(message_of([&] { load_csv(dir.file("ragged.csv"), {}); }).find("line 3"), std::string::npos);

  write_text(dir.file("empty.csv"), "a\nNA\n\n");
  EXPECT_EQ(code_of([&] { load_csv(dir.file("empty.csv"), {}); }), ErrorCode::AllRowsDropped);

  write_text(dir.file("neg.csv"), "a\n-1\n");
  EXPECT_EQ(code_of([&] { load_csv(dir.file("neg.csv"), {{"a"}, {Transform::Log}, std::nullopt}); }),
            ErrorCode::AllRowsDropped);
}

TEST(WriteMeasureCsv, RoundTrips) {
  TempDir dir;
  Matrix x(2, 2);
  x << 0.1, 1e-17, -3, 4.25;
  Vector w(2);
  w << 0.3, 0.7;
  const DiscreteMeasure m(x, w);
  write_measure_csv(dir.file("m.csv"), m, {"u", "v"});
  const auto back = load_csv(dir.file("m.csv"), {{"u", "v"}, {}, "weight"});
  EXPECT_EQ(back.support(), m.support());
  EXPECT_NEAR((back.weights() - w).cwiseAbs().maxCoeff(), 0.0, 1e-16);
}

TEST(ImageToMeasure, Examples) {
  Image a(2, 2);
  a << 0, 1, 0, 1;
  const auto m = image_to_measure(a);
  ASSERT_EQ(m.size(), 2);
  EXPECT_EQ(m.support()(0, 0), 0.0);
  EXPECT_EQ(m.support()(0, 1), 1.0);
  EXPECT_EQ(m.support()(1, 0), 1.0);
  EXPECT_EQ(m.support()(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(m.weights()[0], 0.5);

  Image b(1, 1);
  b << 4;
  const auto one = image_to_measure(b);
  EXPECT_EQ(one.size(), 1);
  EXPECT_EQ(one.weights()[0], 1.0);

  EXPECT_EQ(code_of([] { image_to_measure(Image::Zero(3, 3)); }), ErrorCode::AllZeroImage);
}

TEST(ImageToMeasure, DiscCountsPositivePixels) {
  const Image disc = testing::disc_image(16, 16, 7.5, 7.5, 5.0, 0.8);
  long positive = 0;
  for (Index k = 0; k < disc.size(); ++k) positive += disc.data()[k] > 0.0;
  const auto m = image_to_measure(disc);
  EXPECT_EQ(m.size(), positive);
  double total = 0.0;
  for (Index i = 0; i < m.size(); ++i) total += m.weights()[i];
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ImageToMeasure, RenderingReconstructsNormalisedImage) {
  testing::TempDir dir;
  Image img = testing::disc_image(12, 9, 5, 4, 3.5);
  img(0, 0) = 0.25;
  const auto m = image_to_measure(img);
  const Image back = render_measure(m, 12, 9);
  EXPECT_NEAR((back - img / img.sum()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(RenderMeasure, ClampsOutsideAtomsAndKeepsMass) {
  Matrix x(3, 2);
  x << -4, 1, 1.4, 1.6, 10, 10;
  Vector w(3);
  w << 0.2, 0.3, 0.5;
  const Image r = render_measure(DiscreteMeasure(x, w), 3, 3);
  EXPECT_DOUBLE_EQ(r(0, 1), 0.2);
  EXPECT_DOUBLE_EQ(r(1, 2), 0.3);
  EXPECT_DOUBLE_EQ(r(2, 2), 0.5);
  EXPECT_NEAR(r.sum(), 1.0, 1e-15);
}

TEST(Downsample, AveragesBlocks) {
  Image img(3, 4);
  img << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const Image d = downsample(img, 2);
  ASSERT_EQ(d.rows(), 2);
  ASSERT_EQ(d.cols(), 2);
  EXPECT_DOUBLE_EQ(d(0, 0), 3.5);
  EXPECT_DOUBLE_EQ(d(1, 1), 11.5);
  EXPECT_EQ(code_of([&] { downsample(img, 0); }), ErrorCode::OutOfRange);
}

class ImageRoundTrip : public ::testing::TestWithParam<ImageEncoding> {};

TEST_P(ImageRoundTrip, PreservesQuantisedValues) {
  TempDir dir;
  const ImageEncoding enc = GetParam();
  const bool sixteen = enc == ImageEncoding::Pgm16 || enc == ImageEncoding::Png16;
  const double levels = sixteen ? 65535.0 : 255.0;
  Image img(5, 7);
  for (Index k = 0; k < img.size(); ++k) img.data()[k] = std::round(levels * (k % 11) / 10.0) / levels;
  const std::string path = dir.file("img");
  write_image(path, img, enc);
  const Image back = read_image(path);
  ASSERT_EQ(back.rows(), 5);
  ASSERT_EQ(back.cols(), 7);
  EXPECT_NEAR((back - img).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(AllEncodings, ImageRoundTrip,
                         ::testing::Values(ImageEncoding::Pgm8, ImageEncoding::Pgm16, ImageEncoding::Png8,
                                           ImageEncoding::Png16));

TEST(ReadImage, AsciiPgmWithComments) {
  TempDir dir;
  write_text(dir.file("a.pgm"), "P2\n# comment\n3 2\n# another\n4\n0 1 2\n3 4 4\n");
  const Image img = read_image(dir.file("a.pgm"));
  ASSERT_EQ(img.rows(), 2);
  ASSERT_EQ(img.cols(), 3);
  EXPECT_DOUBLE_EQ(img(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(img(1, 2), 1.0);
}

TEST(ReadImage, RgbaAlphaScalesIntensity) {
  TempDir dir;
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = 2;
  desc.height = 1;
  desc.format = PNG_FORMAT_RGBA;
  // Gray 255 opaque, then gray 255 fully transparent.
  const png_byte pixels[8] = {255, 255, 255, 255, 255, 255, 255, 0};
  ASSERT_TRUE(png_image_write_to_file(&desc, dir.file("a.png").c_str(), 0, pixels, 0, nullptr));
  const Image img = read_image(dir.file("a.png"));
  ASSERT_EQ(img.cols(), 2);
  EXPECT_NEAR(img(0, 0), 1.0, 1e-9);
  EXPECT_EQ(img(0, 1), 0.0);
}

TEST(ReadImage, Errors) {
  TempDir dir;
  write_text(dir.file("x.txt"), "hello");
  EXPECT_EQ(code_of([&] { read_image(dir.file("x.txt")); }), ErrorCode::ImageFormat);
  EXPECT_EQ(code_of([&] { read_image(dir.file("missing.png")); }), ErrorCode::Io);
  write_text(dir.file("short.pgm"), "P5\n4 4\n255\nab");
  EXPECT_EQ(code_of([&] { read_image(dir.file("short.pgm")); }), ErrorCode::ImageFormat);
  write_text(dir.file("broken.png"), "\x89PNG\r\n\x1a\n garbage");
  EXPECT_EQ(code_of([&] { read_image(dir.file("broken.png")); }), ErrorCode::ImageFormat);
}

}  // namespace
}  // namespace wproj
