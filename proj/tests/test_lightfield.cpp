#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "lflane/lenslet.hpp"
#include "lflane/lightfield.hpp"
#include "oracles.hpp"

using namespace lflane;
namespace fs = std::filesystem;

namespace {

void write_raw_floats(const fs::path& p, std::size_t n, float value) {
  std::ofstream out(p, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[4];
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

void write_lf_header(const fs::path& p, int a, int h, int w, int c, const std::string& blob) {
  std::ofstream out(p);
  out << "# lflane container v1\nkind = lightfield\nangular_res = " << a << "\nheight = " << h << "\nwidth = " << w
      << "\nchannels = " << c << "\ndtype = f32\nlayout = uvyxc\nblob = " << blob << "\n";
}

}  // namespace

TEST(LightFieldIo, LoadsHandWrittenSingleViewContainer) {
  oracle::temp_dir dir("lf");
  write_lf_header(dir / "a.lfh", 1, 8, 8, 1, "a.bin");
  write_raw_floats(dir / "a.bin", 64, 0.0f);
  light_field lf = load_lightfield(dir / "a.lfh");
  EXPECT_EQ(lf.angular_res(), 1);
  EXPECT_EQ(lf.height(), 8);
  for (float v : lf.data()) EXPECT_EQ(v, 0.0f);
}

TEST(LightFieldIo, LoadsFullScaleDimensions) {
  oracle::temp_dir dir("lf");
  write_lf_header(dir / "big.lfh", 11, 375, 375, 3, "big.bin");
  write_raw_floats(dir / "big.bin", 11ull * 11 * 375 * 375 * 3, 0.25f);
  light_field lf = load_lightfield(dir / "big.lfh");
  EXPECT_EQ(lf.angular_res() * lf.angular_res(), 121);
  EXPECT_EQ(lf.height(), 375);
  EXPECT_EQ(lf.width(), 375);
  EXPECT_EQ(lf.channels(), 3);
}

TEST(LightFieldIo, BlobOneSampleShortIsRejected) {
  oracle::temp_dir dir("lf");
  write_lf_header(dir / "s.lfh", 3, 4, 4, 1, "s.bin");
  write_raw_floats(dir / "s.bin", 143, 0.5f);
  EXPECT_THROW(load_lightfield(dir / "s.lfh"), data_error);
  write_raw_floats(dir / "s.bin", 144, 0.5f);
  EXPECT_NO_THROW(load_lightfield(dir / "s.lfh"));
}

TEST(LightFieldIo, RejectsEvenAngularResolutionAndOutOfRangeValues) {
  oracle::temp_dir dir("lf");
  write_lf_header(dir / "e.lfh", 2, 2, 2, 1, "e.bin");
  write_raw_floats(dir / "e.bin", 16, 0.5f);
  EXPECT_THROW(load_lightfield(dir / "e.lfh"), data_error);
  write_lf_header(dir / "r.lfh", 1, 2, 2, 1, "r.bin");
  write_raw_floats(dir / "r.bin", 4, 1.5f);
  EXPECT_THROW(load_lightfield(dir / "r.lfh"), data_error);
  EXPECT_THROW(load_lightfield(dir / "missing.lfh"), data_error);
}

TEST(LightFieldIo, SaveWritesExactSampleCount) {
  oracle::temp_dir dir("lf");
  save_lightfield(light_field(3, 2, 2, 1, 0.5f), dir / "c.lfh");
  EXPECT_EQ(fs::file_size(dir / "c.bin"), 36u * 4u);
}

TEST(LightFieldIo, SaveRejectsNaN) {
  oracle::temp_dir dir("lf");
  light_field lf(3, 2, 2, 1, 0.5f);
  lf.at(1, 1, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(save_lightfield(lf, dir / "n.lfh"), data_error);
  EXPECT_FALSE(fs::exists(dir / "n.lfh"));
}

TEST(LightFieldIo, RoundTripIsBitExact) {
  oracle::temp_dir dir("lf");
  for (unsigned long long seed : {1ull, 2ull, 3ull}) {
    const light_field lf = oracle::random_field(3 + 2 * static_cast<int>(seed % 2), 7, 5, 2, seed);
    save_lightfield(lf, dir / "rt.lfh");
    const light_field back = load_lightfield(dir / "rt.lfh");
    ASSERT_TRUE(back == lf);
  }
}

TEST(Views, CentralAndExtractOnConstantCodedField) {
  const light_field lf = oracle::constant_coded(3, 4);
  const image c = central_view(lf);
  const image e = extract_view(lf, 2, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(c.at(y, x), 11.0f);
      EXPECT_EQ(e.at(y, x), 21.0f);
    }
  EXPECT_TRUE(extract_view(lf, 1, 1) == c);
  EXPECT_EQ(extract_view(lf, 0, 0).at(0, 0), 0.0f);
  EXPECT_THROW(extract_view(lf, 3, 0), data_error);
  EXPECT_THROW(extract_view(lf, 0, -1), data_error);
}

TEST(Views, CentralOfElevenByElevenIsFiveFive) {
  const light_field lf = oracle::constant_coded(11, 2, 0.01);
  EXPECT_FLOAT_EQ(central_view(lf).at(0, 0), 0.55f);
  const light_field one = oracle::random_field(1, 3, 3, 1, 9);
  EXPECT_TRUE(central_view(one) == extract_view(one, 0, 0));
}

TEST(Sequences, LoadsFramesInOrderAndRejectsMixedDimensions) {
  oracle::temp_dir dir("seq");
  std::vector<std::string> names;
  for (int t = 0; t < 10; ++t) {
    names.push_back("f" + std::to_string(t) + ".lfh");
    save_lightfield(light_field(3, 4, 4, 1, static_cast<float>(t) / 10), dir / names.back());
  }
  {
    std::ofstream m(dir / "seq.json");
    m << nlohmann::json{{"sequence_id", "s"}, {"frames", names}}.dump();
  }
  const light_field_sequence seq = load_sequence(dir / "seq.json");
  ASSERT_EQ(seq.frames.size(), 10u);
  for (int t = 0; t < 10; ++t) EXPECT_FLOAT_EQ(seq.frames[t].at(0, 0, 0, 0), static_cast<float>(t) / 10);

  {
    std::ofstream m(dir / "one.json");
    m << nlohmann::json{{"sequence_id", "one"}, {"frames", {names[0]}}}.dump();
  }
  EXPECT_EQ(load_sequence(dir / "one.json").frames.size(), 1u);

  save_lightfield(light_field(5, 4, 4, 1, 0.1f), dir / "a5.lfh");
  {
    std::ofstream m(dir / "mixed.json");
    m << nlohmann::json{{"sequence_id", "mixed"}, {"frames", {names[0], "a5.lfh"}}}.dump();
  }
  EXPECT_THROW(load_sequence(dir / "mixed.json"), data_error);
  {
    std::ofstream m(dir / "gone.json");
    m << nlohmann::json{{"sequence_id", "gone"}, {"frames", {names[0], "nope.lfh"}}}.dump();
  }
  EXPECT_THROW(load_sequence(dir / "gone.json"), data_error);
}

// ---- lenslet ---------------------------------------------------------------------

TEST(Lenslet, SelectViewsMatchesNearestBlock) {
  EXPECT_EQ(select_views(11, 2), (view_block{5, 2}));
  EXPECT_EQ(select_views(11, 1), (view_block{5, 1}));
  EXPECT_EQ(select_views(3, 3), (view_block{0, 3}));
  for (int a = 1; a <= 15; a += 2)
    for (int m = 1; m <= a; ++m) {
      const view_block b = select_views(a, m);
      EXPECT_EQ(b.start, oracle::nearest_block_start(a, m)) << "a=" << a << " m=" << m;
      EXPECT_TRUE(b.contains((a - 1) / 2));
      EXPECT_GE(b.start, 0);
      EXPECT_LE(b.start + b.size, a);
    }
  EXPECT_THROW(select_views(3, 4), usage_error);
  EXPECT_THROW(select_views(3, 0), usage_error);
}

TEST(Lenslet, ConstantCodedRowsAlternate) {
  const lenslet_image rep = lenslet_transform(oracle::constant_coded(3, 4), 2);
  const float even[4] = {11, 12, 11, 12}, odd[4] = {21, 22, 21, 22};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(rep.pixels.at(i, j), (i % 2 ? odd : even)[j]) << i << "," << j;
  const image r = recover_view_subgrid(rep, 1, 0);
  for (float v : r.data()) EXPECT_EQ(v, 21.0f);
}

TEST(Lenslet, BruteForceIndexingOracle) {
  for (int a : {3, 5}) {
    for (int m = 1; m <= 3; ++m) {
      const light_field lf = oracle::random_field(a, 6, 12, 2, 40 + a * 10 + m);
      const lenslet_image rep = lenslet_transform(lf, m);
      const int b0 = oracle::nearest_block_start(a, m);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 12; ++j)
          for (int c = 0; c < 2; ++c)
            ASSERT_EQ(rep.pixels.at(i, j, c), lf.at(b0 + i % m, b0 + j % m, i - i % m, j - j % m, c));
    }
  }
}

TEST(Lenslet, MacroOneIsCentralView) {
  const light_field lf = oracle::random_field(5, 7, 9, 3, 5);
  EXPECT_TRUE(lenslet_transform(lf, 1).pixels == central_view(lf));
  EXPECT_TRUE(recover_view_subgrid(lenslet_transform(lf, 1), 0, 0) == central_view(lf));
}

TEST(Lenslet, FullScaleIsTrimmedAndSizePreserving) {
  const light_field lf(11, 375, 375, 1, 0.5f);
  EXPECT_THROW(lenslet_transform(lf, 2), data_error);
  const lenslet_image rep = make_lenslet(lf, 2);
  EXPECT_EQ(rep.pixels.height(), 374);
  EXPECT_EQ(rep.pixels.width(), 374);
  EXPECT_EQ(rep.view_block_start, 5);
}

TEST(Lenslet, RecoverRejectsOffsetsOutOfRange) {
  const lenslet_image rep = lenslet_transform(oracle::constant_coded(3, 4), 2);
  EXPECT_THROW(recover_view_subgrid(rep, 2, 0), data_error);
  EXPECT_THROW(recover_view_subgrid(rep, 0, -1), data_error);
}

TEST(Lenslet, SaveLoadRoundTrip) {
  oracle::temp_dir dir("lsh");
  const lenslet_image rep = make_lenslet(oracle::random_field(5, 9, 9, 1, 77), 2);
  save_lenslet(rep, dir / "x.lsh");
  EXPECT_TRUE(load_lenslet(dir / "x.lsh") == rep);
  EXPECT_THROW(load_lightfield(dir / "x.lsh"), data_error);
}

TEST(Lenslet, DeterministicAcrossCalls) {
  const light_field lf = oracle::random_field(5, 8, 8, 1, 3);
  EXPECT_TRUE(lenslet_transform(lf, 2) == lenslet_transform(lf, 2));
}
