#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csvid/packing.hpp"
#include "csvid/rng.hpp"
#include "csvid/training.hpp"

namespace csvid {

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(errc::invalid_argument, "unknown split: " + s);
}

struct ClipRecord {
  std::string path;  // relative to the manifest file
  int label = 0;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ClipRecord> records;
  std::size_t frames = 0, height = 0, width = 0;  // raw-clip geometry
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // directory of the manifest file

  // set for measurement-domain manifests produced by the encoder
  bool compressed = false;
  std::size_t blocks_h = 0, blocks_w = 0, channels = 0;
  std::uint16_t block_size = 0;
  std::uint32_t measurements = 0;
  std::string family;
  double ratio = 0.0;
};

// ---------------------------------------------------------------------------
// Synthetic action classes
// ---------------------------------------------------------------------------

// Motion signatures. Class 0 is the fall-like accelerating descent used as
// the positive class in binary mode; the rest are deliberately non-falling.
inline const std::vector<std::string>& action_class_names() {
  static const std::vector<std::string> names = {
      "fall_descent",   "walk_horizontal", "drift_diagonal", "static_scene",
      "oscillate_x",    "oscillate_y",     "blob_expand",    "blob_shrink",
      "cross_two",      "rotate_bar"};
  return names;
}

namespace detail {

struct ShapeState {
  double cx, cy;     // center, pixels
  double radius;
  double brightness;
};

inline void draw_disk(VideoClip& clip, std::size_t t, double cx, double cy, double radius,
                      double brightness) {
  auto lo = [](double v) { return static_cast<long>(std::floor(v)); };
  long y0 = std::max<long>(0, lo(cy - radius - 1));
  long y1 = std::min<long>(static_cast<long>(clip.height) - 1, lo(cy + radius + 1));
  long x0 = std::max<long>(0, lo(cx - radius - 1));
  long x1 = std::min<long>(static_cast<long>(clip.width) - 1, lo(cx + radius + 1));
  for (long y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x) {
      double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      auto v = static_cast<std::uint8_t>(std::clamp(brightness, 0.0, 255.0));
      for (std::size_t c = 0; c < 3; ++c)
        clip.at(t, static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = v;
    }
}

inline void draw_bar(VideoClip& clip, std::size_t t, double cx, double cy, double half_len,
                     double half_width, double angle, double brightness) {
  double ca = std::cos(angle), sa = std::sin(angle);
  long y0 = std::max<long>(0, static_cast<long>(cy - half_len - 2));
  long y1 = std::min<long>(static_cast<long>(clip.height) - 1,
                           static_cast<long>(cy + half_len + 2));
  long x0 = std::max<long>(0, static_cast<long>(cx - half_len - 2));
  long x1 = std::min<long>(static_cast<long>(clip.width) - 1,
                           static_cast<long>(cx + half_len + 2));
  for (long y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x) {
      double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double along = dx * ca + dy * sa;
      double across = -dx * sa + dy * ca;
      if (std::fabs(along) > half_len || std::fabs(across) > half_width) continue;
      auto v = static_cast<std::uint8_t>(std::clamp(brightness, 0.0, 255.0));
      for (std::size_t c = 0; c < 3; ++c)
        clip.at(t, static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = v;
    }
}

}  // namespace detail

// Renders one clip of the given class. Position, size, brightness and the
// background are drawn from the rng; the per-class motion signature is fixed.
// Gaussian pixel noise (sigma in gray levels) is added to all channels.
inline VideoClip render_action_clip(int label, std::size_t T, std::size_t H, std::size_t W,
                                    Rng& rng, double noise_sigma = 8.0) {
  require(H >= 32 && W >= 32, errc::invalid_argument, "geometry too small to render shapes");
  require(T >= 2, errc::invalid_argument, "clips need at least two frames");
  VideoClip clip = VideoClip::create(T, H, W);

  double bg = 45.0 + rng.uniform() * 40.0;
  double fg = 180.0 + rng.uniform() * 70.0;
  double mind = static_cast<double>(std::min(H, W));
  double radius = (0.10 + rng.uniform() * 0.05) * mind;
  double hd = static_cast<double>(H), wd = static_cast<double>(W);
  double margin = radius + 2.0;
  auto span01 = [&](double t0, double t1, double u) { return t0 + (t1 - t0) * u; };
  double dur = static_cast<double>(T - 1);

  // per-clip random anchor, kept away from the borders
  double ax = span01(margin, wd - margin, rng.uniform());
  double ay = span01(margin, hd - margin, rng.uniform());
  bool flip = rng.next_u64() & 1;  // mirrors direction for the moving classes
  double sgn = flip ? -1.0 : 1.0;

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        auto v = static_cast<std::uint8_t>(std::clamp(bg, 0.0, 255.0));
        for (std::size_t c = 0; c < 3; ++c) clip.at(t, y, x, c) = v;
      }

    double u = dur > 0 ? static_cast<double>(t) / dur : 0.0;
    switch (label) {
      case 0: {  // fall: accelerating descent, then motionless at the floor
        double top = hd * 0.14;
        double floor = hd - margin;
        double uu = std::min(1.0, u / 0.65);  // lands at 65% of the clip
        double cy = top + (floor - top) * uu * uu;
        detail::draw_disk(clip, t, ax, cy, radius, fg);
        break;
      }
      case 1: {  // horizontal walk: border to border, constant speed
        double cx = flip ? span01(wd - margin, margin, u) : span01(margin, wd - margin, u);
        detail::draw_disk(clip, t, cx, ay, radius, fg);
        break;
      }
      case 2: {  // slow diagonal drift, random quadrant
        double cx = std::clamp(ax + sgn * (u - 0.5) * 0.16 * wd, margin, wd - margin);
        double cy = std::clamp(ay + (u - 0.5) * 0.16 * hd, margin, hd - margin);
        detail::draw_disk(clip, t, cx, cy, radius, fg);
        break;
      }
      case 3: {  // static scene, two motionless blobs
        detail::draw_disk(clip, t, ax, ay, radius, fg);
        detail::draw_disk(clip, t, wd - ax, hd - ay, radius * 0.7, fg * 0.85);
        break;
      }
      case 4: {  // horizontal oscillation, two cycles
        double cx = std::clamp(ax + 0.20 * wd * std::sin(u * 4.0 * M_PI), margin, wd - margin);
        detail::draw_disk(clip, t, cx, ay, radius, fg);
        break;
      }
      case 5: {  // vertical oscillation, two cycles
        double cy = std::clamp(ay + 0.20 * hd * std::sin(u * 4.0 * M_PI), margin, hd - margin);
        detail::draw_disk(clip, t, ax, cy, radius, fg);
        break;
      }
      case 6: {  // expanding blob
        double r = span01(0.05, 0.26, u) * mind;
        detail::draw_disk(clip, t, ax, ay, r, fg);
        break;
      }
      case 7: {  // shrinking blob
        double r = span01(0.26, 0.05, u) * mind;
        detail::draw_disk(clip, t, ax, ay, r, fg);
        break;
      }
      case 8: {  // two objects crossing horizontally
        double cx1 = span01(margin, wd - margin, u);
        double cx2 = span01(wd - margin, margin, u);
        double y2 = std::min(ay + 2.5 * radius, hd - margin);
        detail::draw_disk(clip, t, cx1, ay, radius, fg);
        detail::draw_disk(clip, t, cx2, y2, radius, fg * 0.85);
        break;
      }
      case 9: {  // rotating bar, half a turn around the frame center
        double angle = (flip ? -1.0 : 1.0) * u * M_PI;
        detail::draw_bar(clip, t, wd / 2.0, hd / 2.0, 0.35 * mind, radius * 0.45, angle, fg);
        break;
      }
      default:
        fail(errc::invalid_argument, "unknown action class");
    }

    if (noise_sigma > 0.0) {
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double n = rng.gaussian() * noise_sigma;  // shared across channels
          for (std::size_t c = 0; c < 3; ++c) {
            double v = clip.at(t, y, x, c) + n;
            clip.at(t, y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
          }
        }
    }
  }
  return clip;
}

// Generates the synthetic dataset on disk: VID1 clip files plus a manifest.
// classes = 10 gives the full action set; classes = 2 gives fall (label 1)
// vs a random non-fall motion (label 0). Split is 70/15/15 by clip index
// within each class.
inline DatasetManifest synth_action_dataset(int classes, std::size_t clips_per_class,
                                            std::size_t T, std::size_t H, std::size_t W,
                                            std::uint64_t seed,
                                            const std::filesystem::path& out_dir,
                                            double noise_sigma = 8.0) {
  require(classes == 2 || classes == 10, errc::invalid_argument,
          "classes must be 2 or 10");
  require(H >= 32 && W >= 32, errc::invalid_argument, "geometry too small to render shapes");
  require(T >= 8, errc::invalid_argument, "clips must have at least 8 frames");
  require(clips_per_class >= 1, errc::invalid_argument, "need at least one clip per class");
  std::filesystem::create_directories(out_dir);

  DatasetManifest mf;
  mf.frames = T;
  mf.height = H;
  mf.width = W;
  mf.seed = seed;
  mf.base_dir = out_dir;
  if (classes == 10) {
    mf.class_names = action_class_names();
  } else {
    mf.class_names = {"non_fall", "fall"};
  }

  auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(clips_per_class)));
  auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(clips_per_class)));
  if (n_train == 0) n_train = 1;

  Rng rng(seed);
  std::size_t file_index = 0;
  for (int cls = 0; cls < classes; ++cls) {
    for (std::size_t i = 0; i < clips_per_class; ++i) {
      int motion = cls;
      if (classes == 2)
        motion = (cls == 1) ? 0 : 1 + static_cast<int>(rng.next_u64() % 9);
      VideoClip clip = render_action_clip(motion, T, H, W, rng, noise_sigma);
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%05zu.vid", file_index++);
      save_clip(clip, out_dir / name);
      Split split = i < n_train          ? Split::kTrain
                    : i < n_train + n_val ? Split::kVal
                                          : Split::kTest;
      mf.records.push_back({name, cls, split});
    }
  }
  return mf;
}

// ---------------------------------------------------------------------------
// Clip utilities
// ---------------------------------------------------------------------------

// Fixed-length windows at a temporal stride; count = floor((len-T)/stride)+1.
inline std::vector<VideoClip> window_clip(const VideoClip& video, std::size_t T,
                                          std::size_t stride) {
  require(T >= 1 && stride >= 1, errc::invalid_argument, "window: T and stride must be >= 1");
  require(video.frames >= T, errc::invalid_argument, "window: clip shorter than the window");
  std::vector<VideoClip> out;
  std::size_t frame_bytes = video.height * video.width * 3;
  for (std::size_t start = 0; start + T <= video.frames; start += stride) {
    VideoClip w = VideoClip::create(T, video.height, video.width);
    w.fps = video.fps;
    std::copy_n(video.data.data() + start * frame_bytes, T * frame_bytes, w.data.data());
    out.push_back(std::move(w));
  }
  return out;
}

// Bilinear per-frame resize with pixel-center alignment, channels independent.
inline VideoClip resize_clip(const VideoClip& video, std::size_t new_h, std::size_t new_w) {
  require(new_h >= 1 && new_w >= 1, errc::invalid_argument, "resize: targets must be >= 1");
  if (new_h == video.height && new_w == video.width) return video;
  VideoClip out = VideoClip::create(video.frames, new_h, new_w);
  out.fps = video.fps;
  double sy = static_cast<double>(video.height) / static_cast<double>(new_h);
  double sx = static_cast<double>(video.width) / static_cast<double>(new_w);
  for (std::size_t t = 0; t < video.frames; ++t)
    for (std::size_t y = 0; y < new_h; ++y) {
      double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      double cy = std::clamp(fy, 0.0, static_cast<double>(video.height - 1));
      auto y0 = static_cast<std::size_t>(cy);
      std::size_t y1 = std::min(y0 + 1, video.height - 1);
      double wy = cy - static_cast<double>(y0);
      for (std::size_t x = 0; x < new_w; ++x) {
        double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
        double cx = std::clamp(fx, 0.0, static_cast<double>(video.width - 1));
        auto x0 = static_cast<std::size_t>(cx);
        std::size_t x1 = std::min(x0 + 1, video.width - 1);
        double wx = cx - static_cast<double>(x0);
        for (std::size_t c = 0; c < 3; ++c) {
          double v = (1.0 - wy) * ((1.0 - wx) * video.at(t, y0, x0, c) +
                                   wx * video.at(t, y0, x1, c)) +
                     wy * ((1.0 - wx) * video.at(t, y1, x0, c) + wx * video.at(t, y1, x1, c));
          out.at(t, y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
        }
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O and batch iteration
// ---------------------------------------------------------------------------

inline void save_manifest(const DatasetManifest& mf, const std::filesystem::path& path) {
  nlohmann::json j;
  j["classes"] = mf.class_names;
  j["geometry"] = {{"T", mf.frames}, {"H", mf.height}, {"W", mf.width}};
  j["seed"] = mf.seed;
  if (mf.compressed) {
    j["compressed"] = {{"blocks_h", mf.blocks_h},
                       {"blocks_w", mf.blocks_w},
                       {"channels", mf.channels},
                       {"block_size", mf.block_size},
                       {"measurements", mf.measurements},
                       {"family", mf.family},
                       {"ratio", mf.ratio}};
  }
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : mf.records)
    recs.push_back({{"path", r.path}, {"label", r.label}, {"split", split_name(r.split)}});
  j["records"] = std::move(recs);
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), errc::io_failure, "cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
  require(out.good(), errc::io_failure, "manifest write failed: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), errc::io_failure, "cannot open manifest: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  require(!j.is_discarded(), errc::bad_format, path.string() + ": invalid JSON");

  DatasetManifest mf;
  mf.base_dir = path.parent_path();
  mf.class_names = j.at("classes").get<std::vector<std::string>>();
  mf.frames = j.at("geometry").at("T");
  mf.height = j.at("geometry").at("H");
  mf.width = j.at("geometry").at("W");
  mf.seed = j.value("seed", 0ull);
  if (j.contains("compressed")) {
    const auto& c = j.at("compressed");
    mf.compressed = true;
    mf.blocks_h = c.at("blocks_h");
    mf.blocks_w = c.at("blocks_w");
    mf.channels = c.at("channels");
    mf.block_size = c.at("block_size");
    mf.measurements = c.at("measurements");
    mf.family = c.value("family", "");
    mf.ratio = c.value("ratio", 0.0);
  }
  for (const auto& r : j.at("records")) {
    ClipRecord rec{r.at("path"), r.at("label"), split_from_name(r.at("split"))};
    require(rec.label >= 0 && static_cast<std::size_t>(rec.label) < mf.class_names.size(),
            errc::bad_format, path.string() + ": label out of range");
    mf.records.push_back(std::move(rec));
  }
  return mf;
}

inline std::vector<std::size_t> split_indices(const DatasetManifest& mf, Split split) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mf.records.size(); ++i)
    if (mf.records[i].split == split) idx.push_back(i);
  return idx;
}

// Streams shuffled batches of raw clips from a manifest, decoding VID1 files
// lazily. One pass delivers every record of the split exactly once; the
// final short batch is kept.
class BatchIterator {
 public:
  struct Batch {
    std::vector<VideoClip> clips;
    std::vector<int> labels;
  };

  BatchIterator(const DatasetManifest& mf, Split split, std::size_t batch_size,
                std::uint64_t seed)
      : mf_(mf), batch_size_(batch_size) {
    require(batch_size >= 1, errc::invalid_argument, "batch size must be >= 1");
    order_ = split_indices(mf, split);
    Rng rng(seed);
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[rng.next_u64() % i]);
  }

  std::optional<Batch> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    Batch b;
    std::size_t count = std::min(batch_size_, order_.size() - cursor_);
    for (std::size_t i = 0; i < count; ++i) {
      const ClipRecord& rec = mf_.records[order_[cursor_ + i]];
      VideoClip clip = load_clip(mf_.base_dir / rec.path);
      require(clip.frames == mf_.frames && clip.height == mf_.height &&
                  clip.width == mf_.width,
              errc::bad_format, rec.path + ": geometry does not match the manifest");
      b.clips.push_back(std::move(clip));
      b.labels.push_back(rec.label);
    }
    cursor_ += count;
    return b;
  }

 private:
  const DatasetManifest& mf_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Loads one split of a measurement-domain manifest fully into memory.
inline std::vector<LabeledSample> load_compressed_split(const DatasetManifest& mf, Split split) {
  require(mf.compressed, errc::invalid_argument, "manifest does not hold measurements");
  std::vector<LabeledSample> out;
  for (std::size_t i : split_indices(mf, split)) {
    const ClipRecord& rec = mf.records[i];
    MeasurementTensor mt = load_measurements(mf.base_dir / rec.path);
    require(mt.frames() == mf.frames && mt.blocks_h() == mf.blocks_h &&
                mt.blocks_w() == mf.blocks_w && mt.channels() == mf.channels,
            errc::bad_format, rec.path + ": geometry does not match the manifest");
    out.push_back({std::move(mt.data), rec.label});
  }
  return out;
}

}  // namespace csvid
