#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
  const char* bin = std::getenv("CSVID_BIN");
  EXPECT_NE(bin, nullptr) << "CSVID_BIN must point at the csvid binary";
  return bin ? bin : "";
}

int run(const std::string& args) {
  std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "csvid_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("definitely-not-a-command"), 1);
  EXPECT_EQ(run("synth --classes 3 --out /tmp/csvid_cli_test/bad"), 1);
  EXPECT_EQ(run("make-matrix --family nope --out /tmp/csvid_cli_test/m.csm"), 1);
  EXPECT_EQ(run("make-matrix --family gaussian --block 16 --ratio 5 --out /tmp/x.csm"), 1);
}

TEST(Cli, MissingFilesExitTwo) {
  EXPECT_EQ(run("encode --manifest /nonexistent/m.json --matrix /nonexistent/p.csm"), 2);
  EXPECT_EQ(run("eval --checkpoint /nonexistent.ckpt --manifest /nonexistent.json"), 2);
}

TEST(Cli, FullPipelineDeterministic) {
  fs::path root = fresh_dir("pipeline");
  fs::path data = root / "data";
  std::string base = "--quiet --seed 5 ";

  // synth twice into different dirs must give identical bytes
  ASSERT_EQ(run(base + "synth --classes 2 --clips 6 --out " + (root / "data_a").string()), 0);
  ASSERT_EQ(run(base + "synth --classes 2 --clips 6 --out " + (root / "data_b").string()), 0);
  for (const auto& e : fs::directory_iterator(root / "data_a")) {
    fs::path other = root / "data_b" / e.path().filename();
    ASSERT_TRUE(fs::exists(other));
    ASSERT_EQ(file_bytes(e.path()), file_bytes(other));
  }

  ASSERT_EQ(run(base + "synth --classes 2 --clips 6 --out " + data.string()), 0);

  // matrices: same seed identical, different seed different
  fs::path m1 = root / "m1.csm", m2 = root / "m2.csm", m3 = root / "m3.csm";
  ASSERT_EQ(run("--seed 7 make-matrix --family smm --block 16 --ratio 4 --out " + m1.string()), 0);
  ASSERT_EQ(run("--seed 7 make-matrix --family smm --block 16 --ratio 4 --out " + m2.string()), 0);
  ASSERT_EQ(run("--seed 8 make-matrix --family smm --block 16 --ratio 4 --out " + m3.string()), 0);
  EXPECT_EQ(file_bytes(m1), file_bytes(m2));
  EXPECT_NE(file_bytes(m1), file_bytes(m3));

  // encode twice -> byte-identical measurement files
  fs::path enc1 = root / "enc1", enc2 = root / "enc2";
  ASSERT_EQ(run("encode --manifest " + (data / "manifest.json").string() + " --matrix " +
                m1.string() + " --out " + enc1.string()),
            0);
  ASSERT_EQ(run("encode --manifest " + (data / "manifest.json").string() + " --matrix " +
                m1.string() + " --out " + enc2.string()),
            0);
  for (const auto& e : fs::directory_iterator(enc1)) {
    fs::path other = enc2 / e.path().filename();
    ASSERT_TRUE(fs::exists(other));
    ASSERT_EQ(file_bytes(e.path()), file_bytes(other)) << e.path();
  }

  // element-count ratio: VID has T*H*W*3 u8, MST has T*H*W*3/r f32
  json enc_manifest = read_json(enc1 / "manifest.json");
  EXPECT_EQ(enc_manifest.at("compressed").at("measurements").get<int>(), 64);

  // short deterministic training run
  fs::path run1 = root / "run1", run2 = root / "run2";
  std::string train_args = "--manifest " + (enc1 / "manifest.json").string() +
                           " --max-epochs 2 --batch 4";
  ASSERT_EQ(run("--quiet --seed 3 train " + train_args + " --out " + run1.string()), 0);
  ASSERT_EQ(run("--quiet --seed 3 train " + train_args + " --out " + run2.string()), 0);
  EXPECT_EQ(file_bytes(run1 / "checkpoint.ckpt"), file_bytes(run2 / "checkpoint.ckpt"));
  EXPECT_EQ(file_bytes(run1 / "history.json"), file_bytes(run2 / "history.json"));

  json hist = read_json(run1 / "history.json");
  EXPECT_EQ(hist.at("epochs").size(), 2u);
  EXPECT_FALSE(hist.at("diverged").get<bool>());

  // eval: accuracy in [0,1], confusion sums to the split size
  fs::path ev = root / "eval.json";
  ASSERT_EQ(run("eval --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --manifest " +
                (enc1 / "manifest.json").string() + " --split val --out " + ev.string()),
            0);
  json evj = read_json(ev);
  double acc = evj.at("accuracy");
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  std::size_t conf_sum = 0;
  for (const auto& row : evj.at("confusion"))
    for (const auto& cell : row) conf_sum += cell.get<std::size_t>();
  EXPECT_EQ(conf_sum, evj.at("total").get<std::size_t>());

  // privacy-eval on one clip
  fs::path pv = root / "privacy.json";
  ASSERT_EQ(run("privacy-eval --manifest " + (data / "manifest.json").string() + " --matrix " +
                m1.string() + " --wrong-seed 999 --max-clips 1 --iterations 40 --out " +
                pv.string()),
            0);
  json pvj = read_json(pv);
  EXPECT_EQ(pvj.at("clips").get<int>(), 1);
  EXPECT_TRUE(pvj.at("mean_gap_db").is_number());

  // same wrong seed as the true key -> zero gap
  fs::path pv0 = root / "privacy0.json";
  ASSERT_EQ(run("privacy-eval --manifest " + (data / "manifest.json").string() + " --matrix " +
                m1.string() + " --wrong-seed 7 --max-clips 1 --iterations 40 --out " +
                pv0.string()),
            0);
  EXPECT_EQ(read_json(pv0).at("mean_gap_db").get<double>(), 0.0);

  // report: grid CSV from one eval file
  fs::path csv = root / "report.csv";
  ASSERT_EQ(run("report --out " + csv.string() + " " + ev.string()), 0);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "family,4,16,32,64");
  std::string line;
  bool found = false;
  while (std::getline(in, line))
    if (line.rfind("smm,", 0) == 0) {
      found = true;
      EXPECT_NE(line, "smm,,,,");  // the r=4 cell is filled
    }
  EXPECT_TRUE(found);
}

TEST(Cli, IdentityMatrixAtRatioOne) {
  fs::path root = fresh_dir("identity");
  fs::path m = root / "eye.csm";
  ASSERT_EQ(run("make-matrix --family identity --block 16 --ratio 1 --out " + m.string()), 0);
  EXPECT_EQ(run("make-matrix --family identity --block 16 --ratio 4 --out " + m.string()), 1);
}

}  // namespace
