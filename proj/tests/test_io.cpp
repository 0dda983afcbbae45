#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcart/cifar.hpp"
#include "gcart/ppm.hpp"

using namespace gcart;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gcart_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<unsigned char> record(int label, unsigned char fill) {
  std::vector<unsigned char> r(kCifarRecord, fill);
  r[0] = static_cast<unsigned char>(label);
  return r;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Cifar, DecodesPlanesAndScales) {
  std::vector<unsigned char> bytes = record(3, 0);
  bytes[1] = 255;                     // R of pixel 0
  bytes[1 + kCifarPlane + 33] = 51;   // G of pixel (1, 1)
  bytes[1 + 2 * kCifarPlane + 1023] = 255;
  const fs::path dir = scratch_dir("decode");
  write_bytes(dir / "one.bin", bytes);
  const Dataset ds = read_cifar_file(dir / "one.bin");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.labels[0], 3);
  EXPECT_EQ(ds.images[0].at(0, 0, 0), 1.0);
  EXPECT_EQ(ds.images[0].at(0, 0, 1), 0.0);
  EXPECT_EQ(ds.images[0].at(1, 1, 1), 0.2);
  EXPECT_EQ(ds.images[0].at(31, 31, 2), 1.0);
}

TEST(Cifar, TruncatedFileReportsOffset) {
  const fs::path dir = scratch_dir("trunc");
  auto bytes = record(1, 7);
  auto second = record(2, 7);
  bytes.insert(bytes.end(), second.begin(), second.begin() + 100);
  write_bytes(dir / "t.bin", bytes);
  try {
    read_cifar_file(dir / "t.bin");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("offset 3073"), std::string::npos) << e.what();
  }
}

TEST(Cifar, BadLabelThrows) {
  const fs::path dir = scratch_dir("label");
  write_bytes(dir / "l.bin", record(10, 0));
  EXPECT_THROW(read_cifar_file(dir / "l.bin"), std::runtime_error);
  EXPECT_THROW(read_cifar_file(dir / "missing.bin"), std::runtime_error);
}

TEST(Cifar, WriteReadRoundTripAndSplits) {
  const fs::path dir = scratch_dir("split");
  const Dataset ds = synthetic_cifar(50, 9);
  for (int i = 1; i <= 5; ++i) {
    Dataset part;
    for (std::size_t k = (i - 1) * 10; k < static_cast<std::size_t>(i) * 10; ++k) {
      part.images.push_back(ds.images[k]);
      part.labels.push_back(ds.labels[k]);
    }
    write_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), part);
  }
  write_cifar_file(dir / "test_batch.bin", synthetic_cifar(5, 1));
  const Dataset train = load_cifar10(dir, Split::train);
  EXPECT_EQ(train.size(), 50u);
  EXPECT_EQ(train.images, ds.images);
  EXPECT_EQ(train.labels, ds.labels);
  EXPECT_EQ(load_cifar10(dir, Split::test).size(), 5u);
}

TEST(Cifar, SubsetIsSeededAndWithoutReplacement) {
  Dataset ds = synthetic_cifar(200, 4);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.images[i].pixels[0] = static_cast<double>(i);  // tag
  const Dataset a = subsample(ds, 50, 42);
  const Dataset b = subsample(ds, 50, 42);
  const Dataset c = subsample(ds, 50, 43);
  ASSERT_EQ(a.size(), 50u);
  std::vector<double> ta, tc;
  for (const Image& img : a.images) ta.push_back(img.pixels[0]);
  for (const Image& img : c.images) tc.push_back(img.pixels[0]);
  EXPECT_EQ(a.images, b.images);
  EXPECT_NE(ta, tc);
  EXPECT_TRUE(std::is_sorted(ta.begin(), ta.end()));
  EXPECT_EQ(std::adjacent_find(ta.begin(), ta.end()), ta.end());
  EXPECT_EQ(subsample(ds, 500, 1).size(), 200u);
}

TEST(Cifar, SyntheticIsByteQuantizedAndBalanced) {
  const Dataset ds = synthetic_cifar(30, 2);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), k), 3);
  for (double v : ds.images[5].pixels) EXPECT_DOUBLE_EQ(std::round(v * 255.0), v * 255.0);
}

TEST(Ppm, WhitePixelBytes) {
  std::ostringstream os;
  write_ppm(os, Image(1, 1, 3, 1.0));
  EXPECT_EQ(os.str(), std::string("P6\n1 1\n255\n") + "\xff\xff\xff");
}

TEST(Ppm, OvershootIsClampedAtEncode) {
  EXPECT_EQ(encode_byte(1.03), 255);
  EXPECT_EQ(encode_byte(-0.2), 0);
  EXPECT_EQ(encode_byte(0.5), 128);
}

TEST(Ppm, RoundTripWithinHalfStep) {
  Image img(5, 7, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = std::fmod(0.123 * static_cast<double>(i), 1.0);
  std::stringstream ss;
  write_ppm(ss, img);
  const Image back = read_ppm(ss);
  ASSERT_TRUE(back.same_dims(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.pixels[i] - img.pixels[i]), 1.0 / 510 + 1e-15);
}

TEST(Ppm, HeaderCommentsAreSkipped) {
  const char pixels[] = {0, '\x80', '\xff', 1, 2, 3};
  std::istringstream in(std::string("P6\n# made by hand\n2 1\n255\n") + std::string(pixels, 6));
  const Image img = read_ppm(in);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.at(0, 0, 2), 1.0);
}

TEST(Ppm, MalformedInputThrows) {
  for (std::string bad : {std::string("P3\n1 1\n255\n"), std::string("P6\nx 1\n255\n"), std::string("P6\n1 1\n65535\n"),
                          std::string("P6\n2 2\n255\nabc"), std::string("")}) {
    std::istringstream in(bad);
    EXPECT_THROW(read_ppm(in), std::runtime_error) << bad;
  }
}
