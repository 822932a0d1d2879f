#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "csvid/data.hpp"

namespace fs = std::filesystem;
using namespace csvid;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "csvid_data_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Synth, CountsAndSplits) {
  fs::path dir = fresh_dir("counts");
  DatasetManifest mf = synth_action_dataset(10, 20, 8, 32, 32, 1, dir, 4.0);
  EXPECT_EQ(mf.records.size(), 200u);
  EXPECT_EQ(mf.class_names.size(), 10u);

  std::size_t tr = 0, va = 0, te = 0;
  for (const auto& r : mf.records) {
    if (r.split == Split::kTrain) ++tr;
    if (r.split == Split::kVal) ++va;
    if (r.split == Split::kTest) ++te;
  }
  EXPECT_EQ(tr, 140u);
  EXPECT_EQ(va, 30u);
  EXPECT_EQ(te, 30u);
  EXPECT_EQ(tr + va + te, mf.records.size());

  // every clip exists and decodes with the declared geometry
  for (const auto& r : mf.records) {
    VideoClip c = load_clip(dir / r.path);
    ASSERT_EQ(c.frames, 8u);
    ASSERT_EQ(c.height, 32u);
    ASSERT_EQ(c.width, 32u);
  }
}

TEST(Synth, DeterministicFiles) {
  fs::path a = fresh_dir("det_a");
  fs::path b = fresh_dir("det_b");
  synth_action_dataset(2, 6, 8, 32, 32, 99, a);
  synth_action_dataset(2, 6, 8, 32, 32, 99, b);
  for (const auto& entry : fs::directory_iterator(a)) {
    fs::path other = b / entry.path().filename();
    ASSERT_TRUE(fs::exists(other));
    ASSERT_EQ(file_bytes(entry.path()), file_bytes(other)) << entry.path();
  }
}

// Intensity-weighted centroid of one frame after background subtraction.
double frame_centroid_y(const VideoClip& clip, std::size_t t) {
  // median-ish background: use the most common low value by averaging borders
  double bg = 0.0;
  for (std::size_t x = 0; x < clip.width; ++x) bg += clip.at(t, 0, x, 0);
  bg /= static_cast<double>(clip.width);
  double wsum = 0.0, ysum = 0.0;
  for (std::size_t y = 0; y < clip.height; ++y)
    for (std::size_t x = 0; x < clip.width; ++x) {
      double v = std::max(0.0, static_cast<double>(clip.at(t, y, x, 0)) - bg - 30.0);
      wsum += v;
      ysum += v * static_cast<double>(y);
    }
  return wsum > 0 ? ysum / wsum : static_cast<double>(clip.height) / 2.0;
}

TEST(Synth, FallClassDescendsFastest) {
  fs::path dir = fresh_dir("fall");
  DatasetManifest mf = synth_action_dataset(10, 12, 8, 64, 64, 7, dir, 4.0);

  std::map<int, double> mean_descent;
  std::map<int, int> counts;
  for (const auto& r : mf.records) {
    VideoClip c = load_clip(dir / r.path);
    double d = frame_centroid_y(c, c.frames - 1) - frame_centroid_y(c, 0);
    mean_descent[r.label] += d;
    counts[r.label] += 1;
  }
  for (auto& [k, v] : mean_descent) v /= counts[k];

  EXPECT_GT(mean_descent[0], 0.0) << "fall class must move downward";
  for (int k = 1; k < 10; ++k)
    EXPECT_GT(mean_descent[0], mean_descent[k]) << "class " << k;
}

TEST(Synth, CentroidVelocityHeuristicSeparatesFalls) {
  fs::path dir = fresh_dir("sep");
  DatasetManifest mf = synth_action_dataset(2, 60, 8, 64, 64, 21, dir);
  std::size_t correct = 0;
  for (const auto& r : mf.records) {
    VideoClip c = load_clip(dir / r.path);
    double descent = frame_centroid_y(c, c.frames - 1) - frame_centroid_y(c, 0);
    int pred = descent > 0.25 * static_cast<double>(c.height) ? 1 : 0;
    if (pred == r.label) ++correct;
  }
  double acc = static_cast<double>(correct) / static_cast<double>(mf.records.size());
  EXPECT_GE(acc, 0.95);
}

TEST(Synth, RejectsBadGeometry) {
  fs::path dir = fresh_dir("bad");
  EXPECT_THROW(synth_action_dataset(10, 5, 8, 16, 64, 1, dir), Error);
  EXPECT_THROW(synth_action_dataset(10, 5, 4, 64, 64, 1, dir), Error);
  EXPECT_THROW(synth_action_dataset(3, 5, 8, 64, 64, 1, dir), Error);
}

TEST(Window, CountArithmetic) {
  VideoClip base = VideoClip::create(64, 32, 32);
  EXPECT_EQ(window_clip(base, 8, 8).size(), 8u);
  EXPECT_EQ(window_clip(base, 8, 4).size(), 15u);
  EXPECT_EQ(window_clip(base, 8, 64).size(), 1u);
  EXPECT_THROW(window_clip(VideoClip::create(4, 32, 32), 8, 1), Error);
}

TEST(Window, CopiesTheRightFrames) {
  VideoClip base = VideoClip::create(16, 32, 32);
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t i = 0; i < 32 * 32 * 3; ++i)
      base.data[t * 32 * 32 * 3 + i] = static_cast<std::uint8_t>(t);
  auto windows = window_clip(base, 4, 4);
  ASSERT_EQ(windows.size(), 4u);
  for (std::size_t w = 0; w < 4; ++w)
    for (std::size_t t = 0; t < 4; ++t)
      ASSERT_EQ(windows[w].at(t, 5, 5, 0), static_cast<std::uint8_t>(w * 4 + t));
}

TEST(Resize, IdentityAndConstant) {
  fs::path dir = fresh_dir("resize");
  Rng rng(3);
  VideoClip clip = VideoClip::create(2, 24, 30);
  for (auto& v : clip.data) v = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
  VideoClip same = resize_clip(clip, 24, 30);
  EXPECT_EQ(same.data, clip.data);

  VideoClip constant = VideoClip::create(2, 20, 20);
  for (auto& v : constant.data) v = 137;
  VideoClip bigger = resize_clip(constant, 31, 45);
  for (auto v : bigger.data) ASSERT_EQ(v, 137);
}

TEST(Resize, CheckerboardDownscaleAveragesToMidGray) {
  VideoClip cb = VideoClip::create(1, 2, 2);
  auto set = [&](std::size_t y, std::size_t x, std::uint8_t v) {
    for (std::size_t c = 0; c < 3; ++c) cb.at(0, y, x, c) = v;
  };
  set(0, 0, 0);
  set(0, 1, 255);
  set(1, 0, 255);
  set(1, 1, 0);
  VideoClip one = resize_clip(cb, 1, 1);
  // bilinear at the pixel-center midpoint averages all four: 127.5 -> 128
  EXPECT_EQ(one.at(0, 0, 0, 0), 128);
}

TEST(Manifest, SaveLoadRoundTrip) {
  fs::path dir = fresh_dir("manifest");
  DatasetManifest mf = synth_action_dataset(2, 5, 8, 32, 32, 5, dir);
  save_manifest(mf, dir / "manifest.json");
  DatasetManifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.class_names, mf.class_names);
  EXPECT_EQ(back.records.size(), mf.records.size());
  EXPECT_EQ(back.frames, mf.frames);
  for (std::size_t i = 0; i < mf.records.size(); ++i) {
    EXPECT_EQ(back.records[i].path, mf.records[i].path);
    EXPECT_EQ(back.records[i].label, mf.records[i].label);
    EXPECT_EQ(back.records[i].split, mf.records[i].split);
  }
}

TEST(Batches, PartitionAndDeterminism) {
  fs::path dir = fresh_dir("batches");
  DatasetManifest mf = synth_action_dataset(2, 10, 8, 32, 32, 8, dir);

  auto collect = [&](std::uint64_t seed) {
    BatchIterator it(mf, Split::kTrain, 4, seed);
    std::vector<int> labels;
    std::size_t clips = 0;
    while (auto b = it.next()) {
      clips += b->clips.size();
      for (int l : b->labels) labels.push_back(l);
    }
    return std::pair{clips, labels};
  };

  auto [n1, l1] = collect(42);
  auto [n2, l2] = collect(42);
  auto train_count = split_indices(mf, Split::kTrain).size();
  EXPECT_EQ(n1, train_count);    // exactly once per epoch
  EXPECT_EQ(l1, l2);             // same seed, same order
  auto [n3, l3] = collect(43);
  EXPECT_EQ(n3, train_count);
  std::vector<int> s1 = l1, s3 = l3;
  std::sort(s1.begin(), s1.end());
  std::sort(s3.begin(), s3.end());
  EXPECT_EQ(s1, s3);  // same multiset regardless of order
}

TEST(Batches, CorruptClipNamesTheFile) {
  fs::path dir = fresh_dir("corrupt");
  DatasetManifest mf = synth_action_dataset(2, 3, 8, 32, 32, 9, dir);
  // truncate the first train clip
  std::string victim;
  for (const auto& r : mf.records)
    if (r.split == Split::kTrain) {
      victim = r.path;
      break;
    }
  fs::resize_file(dir / victim, 10);

  BatchIterator it(mf, Split::kTrain, 64, 1);
  try {
    while (auto b = it.next()) {
    }
    FAIL() << "expected a structured error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos);
  }
}

}  // namespace
