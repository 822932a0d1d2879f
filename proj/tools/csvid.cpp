// Command-line front end for the compressed-domain video classification
// pipeline: dataset synthesis, sensing-matrix generation, block-CS encoding,
// training, evaluation, the privacy experiment, and report assembly.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csvid/checkpoint.hpp"
#include "csvid/data.hpp"
#include "csvid/packing.hpp"
#include "csvid/recon.hpp"
#include "csvid/sensing.hpp"
#include "csvid/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool g_quiet = false;

void say(const std::string& line) {
  if (!g_quiet) std::cout << line << "\n";
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  csvid::require(in.good(), csvid::errc::io_failure, "cannot open: " + path.string());
  json j = json::parse(in, nullptr, false);
  csvid::require(!j.is_discarded(), csvid::errc::bad_format, path.string() + ": invalid JSON");
  return j;
}

void write_json_file(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  csvid::require(out.good(), csvid::errc::io_failure, "cannot write: " + path.string());
  out << j.dump(2) << "\n";
  csvid::require(out.good(), csvid::errc::io_failure, "write failed: " + path.string());
}

// PSNR values can carry the +infinity exact-reconstruction marker, which
// JSON cannot represent as a number.
json json_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

struct RunConfig {
  json root = json::object();

  static RunConfig from_file(const std::optional<std::string>& path) {
    RunConfig c;
    if (path) c.root = load_json_file(*path);
    return c;
  }

  json section(const std::string& name) const {
    return root.contains(name) ? root.at(name) : json::object();
  }
};

// Family parameter defaults that keep every supported (B, r) combination
// constructible: s = B/2 sub-blocks, quarter-length windows, half-block
// kernels at non-overlapping stride.
csvid::SensingMatrix make_matrix_from_specs(const std::string& family, std::uint16_t B,
                                            std::uint32_t ratio, std::uint64_t seed,
                                            std::optional<std::uint16_t> sub_block,
                                            std::optional<std::uint16_t> window,
                                            std::optional<std::uint16_t> kernel,
                                            std::optional<std::uint16_t> stride) {
  csvid::require(B >= 2, csvid::errc::invalid_argument, "block size must be >= 2");
  const std::uint32_t n = static_cast<std::uint32_t>(B) * B;
  static const std::uint32_t kSupported[] = {1, 4, 16, 32, 64};
  bool ok = false;
  for (std::uint32_t r : kSupported) ok = ok || r == ratio;
  csvid::require(ok, csvid::errc::invalid_argument,
                 "ratio must be one of 1, 4, 16, 32, 64");
  csvid::require(n % ratio == 0, csvid::errc::invalid_argument,
                 "block pixel count must be divisible by the ratio");
  const std::uint32_t m = n / ratio;

  csvid::MatrixFamily fam = csvid::family_from_name(family);
  switch (fam) {
    case csvid::MatrixFamily::kGaussian:
      return csvid::build_gaussian(m, n, seed);
    case csvid::MatrixFamily::kBernoulli:
      return csvid::build_bernoulli(m, n, seed);
    case csvid::MatrixFamily::kSMM:
      return csvid::build_smm(m, B, sub_block.value_or(B / 2), seed);
    case csvid::MatrixFamily::kLSMM:
      return csvid::build_lsmm(m, n, window.value_or(static_cast<std::uint16_t>(n / 4)), seed);
    case csvid::MatrixFamily::kConvCS:
      return csvid::build_conv_cs(m, B, kernel.value_or(B / 2), stride.value_or(B / 2), seed);
    case csvid::MatrixFamily::kIdentity:
      csvid::require(ratio == 1, csvid::errc::invalid_argument,
                     "the identity family requires ratio 1");
      return csvid::build_identity(B, seed);
  }
  csvid::fail(csvid::errc::invalid_argument, "unknown matrix family");
}

csvid::NetworkConfig model_config_from_json(const json& model, std::size_t classes,
                                            std::array<std::size_t, 4> input) {
  csvid::NetworkConfig cfg;
  cfg.input = input;
  cfg.classes = classes;
  if (model.contains("stem_channels")) cfg.stem_channels = model.at("stem_channels");
  if (model.contains("inception")) {
    const auto& inc = model.at("inception");
    csvid::require(inc.size() == 4, csvid::errc::invalid_argument,
                   "model.inception must list four blocks");
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& row = inc.at(q);
      csvid::require(row.size() == 6, csvid::errc::invalid_argument,
                     "each inception row needs six channel counts");
      cfg.inception[q] = {row.at(0), row.at(1), row.at(2), row.at(3), row.at(4), row.at(5)};
    }
  }
  if (model.contains("pool_after_stem")) cfg.pool_after_stem = model.at("pool_after_stem");
  if (model.contains("pool_after_inc2")) cfg.pool_after_inc2 = model.at("pool_after_inc2");
  cfg.validate();
  return cfg;
}

csvid::TrainSchedule schedule_from_json(const json& s) {
  csvid::TrainSchedule sched;
  if (s.contains("lr")) sched.initial_lr = s.at("lr");
  if (s.contains("factor")) sched.plateau_factor = s.at("factor");
  if (s.contains("plateau_patience")) sched.plateau_patience = s.at("plateau_patience");
  if (s.contains("stop_patience")) sched.stop_patience = s.at("stop_patience");
  if (s.contains("batch")) sched.batch_size = s.at("batch");
  if (s.contains("max_epochs")) sched.max_epochs = s.at("max_epochs");
  sched.validate();
  return sched;
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::optional<std::uint64_t>& seed_flag,
              const std::string& out_dir, std::optional<int> classes_flag,
              std::optional<std::size_t> clips_flag) {
  json d = cfg.section("data");
  int classes = classes_flag.value_or(d.value("classes", 10));
  std::size_t clips = clips_flag.value_or(d.value("clips_per_class", std::size_t{100}));
  std::size_t T = d.value("T", std::size_t{8});
  std::size_t H = d.value("H", std::size_t{64});
  std::size_t W = d.value("W", std::size_t{64});
  double noise = d.value("noise_sigma", 8.0);
  std::uint64_t seed = seed_flag.value_or(d.value("seed", std::uint64_t{1}));

  csvid::DatasetManifest mf =
      csvid::synth_action_dataset(classes, clips, T, H, W, seed, out_dir, noise);
  fs::path manifest = fs::path(out_dir) / "manifest.json";
  csvid::save_manifest(mf, manifest);
  say("wrote " + std::to_string(mf.records.size()) + " clips");
  std::cout << manifest.string() << "\n";
  return 0;
}

int cmd_make_matrix(const RunConfig& cfg, const std::optional<std::uint64_t>& seed_flag,
                    const std::string& out_file, std::optional<std::string> family_flag,
                    std::optional<std::uint16_t> block_flag,
                    std::optional<std::uint32_t> ratio_flag,
                    std::optional<std::uint16_t> sub_block, std::optional<std::uint16_t> window,
                    std::optional<std::uint16_t> kernel, std::optional<std::uint16_t> stride) {
  json s = cfg.section("sensing");
  std::string family = family_flag.value_or(s.value("family", "gaussian"));
  std::uint16_t B = block_flag.value_or(s.value("B", std::uint16_t{16}));
  std::uint32_t ratio = ratio_flag.value_or(s.value("ratio", std::uint32_t{4}));
  std::uint64_t seed = seed_flag.value_or(s.value("seed", std::uint64_t{7}));
  if (!sub_block && s.contains("sub_block")) sub_block = s.at("sub_block").get<std::uint16_t>();
  if (!window && s.contains("window")) window = s.at("window").get<std::uint16_t>();
  if (!kernel && s.contains("kernel")) kernel = s.at("kernel").get<std::uint16_t>();
  if (!stride && s.contains("stride")) stride = s.at("stride").get<std::uint16_t>();

  csvid::SensingMatrix phi =
      make_matrix_from_specs(family, B, ratio, seed, sub_block, window, kernel, stride);
  fs::path out(out_file);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  csvid::save_matrix(phi, out);
  say(std::string(csvid::family_name(phi.config.family)) + " " +
      std::to_string(phi.rows()) + "x" + std::to_string(phi.cols()) + " matrix");
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_encode(const std::string& manifest_path, const std::string& matrix_path,
               const std::string& out_dir) {
  csvid::DatasetManifest mf = csvid::load_manifest(manifest_path);
  csvid::require(!mf.compressed, csvid::errc::invalid_argument,
                 "encode expects a raw clip manifest");
  csvid::SensingMatrix phi = csvid::load_matrix(matrix_path);
  fs::create_directories(out_dir);

  csvid::DatasetManifest out = mf;
  out.base_dir = out_dir;
  out.compressed = true;
  out.block_size = phi.config.block_size;
  out.measurements = phi.rows();
  out.family = csvid::family_name(phi.config.family);
  out.ratio = phi.config.ratio();
  out.records.clear();

  for (const auto& rec : mf.records) {
    csvid::VideoClip clip = csvid::load_clip(mf.base_dir / rec.path);
    clip = csvid::pad_clip(clip, phi.config.block_size);
    csvid::MeasurementTensor mt = csvid::pack_clip(clip, phi);
    out.blocks_h = mt.blocks_h();
    out.blocks_w = mt.blocks_w();
    out.channels = mt.channels();
    std::string name = fs::path(rec.path).stem().string() + ".mst";
    csvid::save_measurements(mt, fs::path(out_dir) / name);
    out.records.push_back({name, rec.label, rec.split});
  }
  fs::path manifest = fs::path(out_dir) / "manifest.json";
  csvid::save_manifest(out, manifest);
  say("encoded " + std::to_string(out.records.size()) + " clips at r=" +
      std::to_string(phi.config.ratio()));
  std::cout << manifest.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::optional<std::uint64_t>& seed_flag,
              const std::string& manifest_path, const std::string& out_dir,
              std::optional<std::string> init_ckpt, std::optional<std::size_t> classes_flag,
              std::optional<int> max_epochs_flag, std::optional<std::size_t> batch_flag) {
  csvid::DatasetManifest mf = csvid::load_manifest(manifest_path);
  csvid::require(mf.compressed, csvid::errc::invalid_argument,
                 "train expects an encoded (measurement) manifest");

  std::vector<csvid::LabeledSample> train_set =
      csvid::load_compressed_split(mf, csvid::Split::kTrain);
  std::vector<csvid::LabeledSample> val_set = csvid::load_compressed_split(mf, csvid::Split::kVal);
  csvid::require(!train_set.empty() && !val_set.empty(), csvid::errc::invalid_argument,
                 "train and val splits must be non-empty");

  std::array<std::size_t, 4> input{mf.frames, mf.blocks_h, mf.blocks_w, mf.channels};
  std::size_t classes = classes_flag.value_or(mf.class_names.size());
  std::uint64_t seed = seed_flag.value_or(cfg.root.value("seed", std::uint64_t{42}));

  csvid::TrainSchedule sched = schedule_from_json(cfg.section("schedule"));
  if (max_epochs_flag) sched.max_epochs = *max_epochs_flag;
  if (batch_flag) sched.batch_size = *batch_flag;

  csvid::ModelParams init;
  const csvid::ModelParams* init_ptr = nullptr;
  csvid::NetworkConfig net_cfg;
  if (init_ckpt) {
    init = csvid::load_checkpoint_transfer(*init_ckpt, classes, seed);
    csvid::require(init.config.input == input, csvid::errc::invalid_argument,
                   "checkpoint input geometry does not match the manifest");
    net_cfg = init.config;
    init_ptr = &init;
  } else {
    net_cfg = model_config_from_json(cfg.section("model"), classes, input);
  }

  csvid::EpochCallback logger = [](const csvid::EpochStats& e) {
    if (g_quiet) return;
    std::cout << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss
              << " acc " << e.val_accuracy << " lr " << e.lr << "\n";
  };

  csvid::TrainResult result =
      csvid::train(train_set, val_set, net_cfg, sched, seed, init_ptr, logger);

  fs::create_directories(out_dir);
  fs::path ckpt = fs::path(out_dir) / "checkpoint.ckpt";
  json meta = {{"best_epoch", result.best_epoch},
               {"best_val_loss", result.best_val_loss},
               {"stop_reason", result.stop_reason},
               {"family", mf.family},
               {"ratio", mf.ratio},
               {"seed", seed}};
  csvid::save_checkpoint(result.params, ckpt, meta);

  json hist = json::array();
  for (const auto& e : result.history)
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_loss", std::isfinite(e.val_loss) ? json(e.val_loss) : json()},
                    {"val_accuracy", e.val_accuracy},
                    {"lr", e.lr}});
  json history = {{"epochs", hist},
                  {"best_epoch", result.best_epoch},
                  {"best_val_loss", result.best_val_loss},
                  {"stop_reason", result.stop_reason},
                  {"diverged", result.diverged},
                  {"family", mf.family},
                  {"ratio", mf.ratio}};
  write_json_file(history, fs::path(out_dir) / "history.json");

  if (result.diverged) {
    std::cerr << "training diverged; history written\n";
    return 3;
  }
  say("best val loss " + std::to_string(result.best_val_loss) + " at epoch " +
      std::to_string(result.best_epoch));
  std::cout << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split_name_, const std::string& out_file) {
  csvid::DatasetManifest mf = csvid::load_manifest(manifest_path);
  csvid::require(mf.compressed, csvid::errc::invalid_argument,
                 "eval expects an encoded (measurement) manifest");
  csvid::ModelParams params = csvid::load_checkpoint(ckpt_path);
  std::vector<csvid::LabeledSample> data =
      csvid::load_compressed_split(mf, csvid::split_from_name(split_name_));
  csvid::require(!data.empty(), csvid::errc::invalid_argument, "split is empty");

  csvid::EvalResult r = csvid::evaluate(params, data);
  json rep = {{"accuracy", r.accuracy},
              {"correct", r.correct},
              {"total", r.total},
              {"confusion", r.confusion},
              {"classes", mf.class_names},
              {"split", split_name_},
              {"family", mf.family},
              {"ratio", mf.ratio}};
  write_json_file(rep, out_file);
  std::cout << "accuracy " << r.accuracy << "\n";
  return 0;
}

int cmd_privacy_eval(const RunConfig& cfg, const std::string& manifest_path,
                     const std::string& matrix_path, std::uint64_t wrong_seed,
                     const std::string& out_file, std::optional<int> iterations,
                     std::optional<double> lambda, std::size_t max_clips) {
  csvid::DatasetManifest mf = csvid::load_manifest(manifest_path);
  csvid::require(!mf.compressed, csvid::errc::invalid_argument,
                 "privacy-eval expects a raw clip manifest");
  csvid::SensingMatrix true_phi = csvid::load_matrix(matrix_path);
  csvid::SensingConfig wrong_cfg = true_phi.config;
  wrong_cfg.seed = wrong_seed;
  csvid::SensingMatrix wrong_phi = csvid::build_from_config(wrong_cfg);

  json recon_section = cfg.section("recon");
  csvid::ReconConfig rc;
  rc.iterations = iterations.value_or(recon_section.value("iterations", 200));
  rc.lambda = lambda.value_or(recon_section.value("lambda", 0.01));

  json per_clip = json::array();
  double sum_true = 0.0, sum_wrong = 0.0, sum_gap = 0.0;
  std::size_t count = 0;
  for (const auto& rec : mf.records) {
    if (count >= max_clips) break;
    csvid::VideoClip clip = csvid::load_clip(mf.base_dir / rec.path);
    clip = csvid::pad_clip(clip, true_phi.config.block_size);
    csvid::PrivacyGap g = csvid::privacy_gap(clip, true_phi, wrong_phi, rc);
    per_clip.push_back({{"clip", rec.path},
                        {"psnr_true_db", json_db(g.psnr_true)},
                        {"psnr_wrong_db", json_db(g.psnr_wrong)},
                        {"gap_db", json_db(g.gap)}});
    sum_true += g.psnr_true;
    sum_wrong += g.psnr_wrong;
    sum_gap += g.gap;
    ++count;
  }
  csvid::require(count > 0, csvid::errc::invalid_argument, "no clips to evaluate");

  double n = static_cast<double>(count);
  json rep = {{"clips", count},
              {"wrong_seed", wrong_seed},
              {"mean_psnr_true_db", json_db(sum_true / n)},
              {"mean_psnr_wrong_db", json_db(sum_wrong / n)},
              {"mean_gap_db", json_db(sum_gap / n)},
              {"per_clip", per_clip}};
  write_json_file(rep, out_file);
  std::cout << "mean gap " << (sum_gap / n) << " dB\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& eval_files, const std::string& out_file) {
  static const char* kFamilies[] = {"gaussian", "bernoulli", "smm", "lsmm", "convcs"};
  static const int kRatios[] = {4, 16, 32, 64};
  std::map<std::string, std::map<int, double>> grid;
  for (const auto& f : eval_files) {
    json j = load_json_file(f);
    std::string family = j.value("family", "");
    double ratio = j.value("ratio", 0.0);
    double acc = j.at("accuracy");
    grid[family][static_cast<int>(std::lround(ratio))] = acc;
  }

  std::ostringstream csv;
  csv << "family";
  for (int r : kRatios) csv << "," << r;
  csv << "\n";
  for (const char* fam : kFamilies) {
    csv << fam;
    for (int r : kRatios) {
      csv << ",";
      auto fit = grid.find(fam);
      if (fit != grid.end()) {
        auto rit = fit->second.find(r);
        if (rit != fit->second.end()) csv << rit->second;
      }
    }
    csv << "\n";
  }

  fs::path out(out_file);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream o(out, std::ios::trunc);
  csvid::require(o.good(), csvid::errc::io_failure, "cannot write: " + out_file);
  o << csv.str();
  csvid::require(o.good(), csvid::errc::io_failure, "write failed: " + out_file);
  std::cout << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressed-domain video classification pipeline"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_arg;
  app.add_option("--config", config_path, "JSON run configuration")->expected(1);
  app.add_option("--seed", seed_flag, "seed override");
  app.add_flag("--quiet", g_quiet, "suppress progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic action dataset");
  std::string synth_out = "data";
  std::optional<int> synth_classes;
  std::optional<std::size_t> synth_clips;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--classes", synth_classes, "2 or 10");
  synth->add_option("--clips", synth_clips, "clips per class");

  // make-matrix
  auto* mkmat = app.add_subcommand("make-matrix", "build and save a sensing matrix");
  std::string mkmat_out = "matrix.csm";
  std::optional<std::string> mk_family;
  std::optional<std::uint16_t> mk_block, mk_sub, mk_window, mk_kernel, mk_stride;
  std::optional<std::uint32_t> mk_ratio;
  mkmat->add_option("--out", mkmat_out, "output file");
  mkmat->add_option("--family", mk_family, "gaussian|bernoulli|smm|lsmm|convcs|identity");
  mkmat->add_option("--block", mk_block, "block size B");
  mkmat->add_option("--ratio", mk_ratio, "compression ratio r = N/M");
  mkmat->add_option("--sub-block", mk_sub, "SMM sub-block side");
  mkmat->add_option("--window", mk_window, "LSMM row support length");
  mkmat->add_option("--kernel", mk_kernel, "ConvCS kernel side");
  mkmat->add_option("--stride", mk_stride, "ConvCS stride");

  // encode
  auto* enc = app.add_subcommand("encode", "block-CS encode a clip dataset");
  std::string enc_manifest, enc_matrix, enc_out = "encoded";
  enc->add_option("--manifest", enc_manifest, "raw clip manifest")->required();
  enc->add_option("--matrix", enc_matrix, "CSM1 matrix file")->required();
  enc->add_option("--out", enc_out, "output directory");

  // train
  auto* tr = app.add_subcommand("train", "train the 3D ConvNet on measurements");
  std::string tr_manifest, tr_out = "run";
  std::optional<std::string> tr_init;
  std::optional<std::size_t> tr_classes, tr_batch;
  std::optional<int> tr_epochs;
  tr->add_option("--manifest", tr_manifest, "encoded manifest")->required();
  tr->add_option("--out", tr_out, "output directory");
  tr->add_option("--init", tr_init, "checkpoint to fine-tune from");
  tr->add_option("--classes", tr_classes, "class count override (transfer)");
  tr->add_option("--max-epochs", tr_epochs, "epoch cap override");
  tr->add_option("--batch", tr_batch, "batch size override");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_manifest, ev_split = "test", ev_out = "eval.json";
  ev->add_option("--checkpoint", ev_ckpt, "CKP1 file")->required();
  ev->add_option("--manifest", ev_manifest, "encoded manifest")->required();
  ev->add_option("--split", ev_split, "train|val|test");
  ev->add_option("--out", ev_out, "report file");

  // privacy-eval
  auto* pv = app.add_subcommand("privacy-eval", "true-key vs wrong-key reconstruction gap");
  std::string pv_manifest, pv_matrix, pv_out = "privacy.json";
  std::uint64_t pv_wrong_seed = 0;
  std::optional<int> pv_iters;
  std::optional<double> pv_lambda;
  std::size_t pv_max_clips = 8;
  pv->add_option("--manifest", pv_manifest, "raw clip manifest")->required();
  pv->add_option("--matrix", pv_matrix, "true-key CSM1 matrix")->required();
  pv->add_option("--wrong-seed", pv_wrong_seed, "seed for the wrong-key matrix")->required();
  pv->add_option("--out", pv_out, "report file");
  pv->add_option("--iterations", pv_iters, "ISTA iterations");
  pv->add_option("--lambda", pv_lambda, "soft-threshold weight");
  pv->add_option("--max-clips", pv_max_clips, "clips to evaluate");

  // report
  auto* rp = app.add_subcommand("report", "assemble accuracy CSV from eval reports");
  std::vector<std::string> rp_inputs;
  std::string rp_out = "report.csv";
  rp->add_option("--out", rp_out, "CSV output file");
  rp->add_option("evals", rp_inputs, "eval JSON files")->required();

  try {
    app.parse(argc, argv);
    RunConfig cfg = RunConfig::from_file(config_path);

    if (*synth) return cmd_synth(cfg, seed_flag, synth_out, synth_classes, synth_clips);
    if (*mkmat)
      return cmd_make_matrix(cfg, seed_flag, mkmat_out, mk_family, mk_block, mk_ratio, mk_sub,
                             mk_window, mk_kernel, mk_stride);
    if (*enc) return cmd_encode(enc_manifest, enc_matrix, enc_out);
    if (*tr)
      return cmd_train(cfg, seed_flag, tr_manifest, tr_out, tr_init, tr_classes, tr_epochs,
                       tr_batch);
    if (*ev) return cmd_eval(ev_ckpt, ev_manifest, ev_split, ev_out);
    if (*pv)
      return cmd_privacy_eval(cfg, pv_manifest, pv_matrix, pv_wrong_seed, pv_out, pv_iters,
                              pv_lambda, pv_max_clips);
    if (*rp) return cmd_report(rp_inputs, rp_out);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const csvid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case csvid::errc::invalid_argument: return 1;
      case csvid::errc::io_failure:
      case csvid::errc::bad_format: return 2;
      case csvid::errc::numeric_failure: return 3;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
