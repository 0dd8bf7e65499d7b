#include "bgadj/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "bgadj/rng.hpp"
#include "bgadj/synth.hpp"

using namespace bgadj;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("bgadj_io_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_F(IoTest, BafRoundTripIsExact) {
  RngStream g(3);
  BafRaster r;
  r.nx = 13;
  r.ny = 7;
  r.channels = 2;
  r.data.resize(r.pixels() * 2);
  for (double& v : r.data) v = 100.0 * g.normal();
  write_baf(path("a.baf"), r);
  const BafRaster back = read_baf(path("a.baf"));
  EXPECT_EQ(back.nx, r.nx);
  EXPECT_EQ(back.ny, r.ny);
  EXPECT_EQ(back.channels, r.channels);
  ASSERT_EQ(back.data, r.data);

  // byte-identical on rewrite
  write_baf(path("b.baf"), back);
  EXPECT_EQ(slurp(path("a.baf")), slurp(path("b.baf")));
}

TEST_F(IoTest, BafHeaderAndPayloadValidation) {
  std::ofstream(path("bad1.baf")) << "BAF2 2 2 1\n";
  EXPECT_THROW(read_baf(path("bad1.baf")), DataFormatError);

  std::ofstream(path("bad2.baf")) << "BAF1 2 2 1\nshort";
  EXPECT_THROW(read_baf(path("bad2.baf")), DataFormatError);

  {
    BafRaster r;
    r.nx = 2;
    r.ny = 1;
    r.channels = 1;
    r.data = {1.0, 2.0};
    write_baf(path("trail.baf"), r);
    std::ofstream f(path("trail.baf"), std::ios::app | std::ios::binary);
    f << "x";
  }
  EXPECT_THROW(read_baf(path("trail.baf")), DataFormatError);

  BafRaster nan_raster;
  nan_raster.nx = 1;
  nan_raster.ny = 1;
  nan_raster.channels = 1;
  nan_raster.data = {std::nan("")};
  EXPECT_THROW(write_baf(path("nan.baf"), nan_raster), std::invalid_argument);
  EXPECT_THROW(read_baf(path("missing.baf")), DataFormatError);
}

TEST_F(IoTest, ParamsRoundTripByteIdentical) {
  auto spec = default_scenario('A', 32, 32, 1);
  write_params(path("p1.params"), spec.model);
  const ParsedParams parsed = read_params(path("p1.params"));
  EXPECT_EQ(parsed.K, 3u);
  EXPECT_EQ(parsed.p, 2u);
  EXPECT_EQ(parsed.kind, WeightKind::spatial);
  const MixtureModel model = parsed.to_model(spec.model.templates);
  write_params(path("p2.params"), model);
  EXPECT_EQ(slurp(path("p1.params")), slurp(path("p2.params")));
}

TEST_F(IoTest, ParamsRoundTripPreservesValuesExactly) {
  RngStream g(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<GaussianComponent> comps;
    for (int k = 0; k < 2; ++k) {
      Mat a(2, 2);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) a(i, j) = g.normal();
      Mat m = a.transposed() * a;
      m(0, 0) += 0.2;
      m(1, 1) += 0.2;
      comps.emplace_back(Vec{g.normal(), g.normal()}, SpdMatrix(m));
    }
    const double pi1 = 0.2 + 0.6 * g.uniform();
    const MixtureModel model = make_global_model(comps, {pi1, 1.0 - pi1});
    write_params(path("r.params"), model);
    const MixtureModel back = read_params(path("r.params")).to_model();
    for (std::size_t k = 0; k < 2; ++k) {
      ASSERT_EQ(back.weights[k], model.weights[k]);
      for (std::size_t d = 0; d < 2; ++d)
        ASSERT_EQ(back.components[k].mean[d], model.components[k].mean[d]);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          ASSERT_EQ(back.components[k].cov(i, j), model.components[k].cov(i, j));
    }
  }
}

TEST_F(IoTest, ParamsValidation) {
  std::ofstream(path("bad.params")) << "K 2\np 1\npi 0.5 0.5\nmu 1 0\n";
  EXPECT_THROW(read_params(path("bad.params")), DataFormatError);
  std::ofstream(path("bad2.params")) << "K 2\np 1\nwhat 1\n";
  EXPECT_THROW(read_params(path("bad2.params")), DataFormatError);
  std::ofstream(path("bad3.params"))
      << "K 1\np 1\npi 1\nmu 1 0\nsigma 1\n-2\n";  // negative variance
  EXPECT_THROW(read_params(path("bad3.params")), DataFormatError);
}

TEST_F(IoTest, CsvSeventeenSignificantDigits) {
  write_csv(path("t.csv"), "a,b", {{1.0 / 3.0, 2.0}, {1e-300, 0.1}});
  const std::string body = slurp(path("t.csv"));
  EXPECT_NE(body.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(body.find("a,b\n"), std::string::npos);
  // parse back and compare bit-exactly
  EXPECT_EQ(std::stod("0.33333333333333331"), 1.0 / 3.0);
}
