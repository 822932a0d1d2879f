#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "csvid/convnet.hpp"
#include "csvid/io.hpp"

namespace csvid {

inline nlohmann::json network_config_to_json(const NetworkConfig& cfg) {
  nlohmann::json inc = nlohmann::json::array();
  for (const auto& s : cfg.inception) inc.push_back({s.a, s.b1, s.b2, s.c1, s.c2, s.d});
  return {{"input", {cfg.input[0], cfg.input[1], cfg.input[2], cfg.input[3]}},
          {"stem_channels", cfg.stem_channels},
          {"inception", inc},
          {"pool_after_stem", cfg.pool_after_stem},
          {"pool_after_inc2", cfg.pool_after_inc2},
          {"classes", cfg.classes}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  for (int i = 0; i < 4; ++i) cfg.input[static_cast<std::size_t>(i)] = j.at("input").at(i);
  cfg.stem_channels = j.at("stem_channels");
  const auto& inc = j.at("inception");
  require(inc.size() == 4, errc::bad_format, "config must list four inception blocks");
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& row = inc.at(q);
    require(row.size() == 6, errc::bad_format, "inception row must have six channel counts");
    cfg.inception[q] = {row.at(0), row.at(1), row.at(2), row.at(3), row.at(4), row.at(5)};
  }
  cfg.pool_after_stem = j.value("pool_after_stem", true);
  cfg.pool_after_inc2 = j.value("pool_after_inc2", true);
  cfg.classes = j.at("classes");
  cfg.validate();
  return cfg;
}

// --- CKP1 checkpoint file --------------------------------------------------
// magic "CKP1" | u32 header length | header JSON (config, seed, classes,
// training metadata) | u32 tensor count | per tensor: u32 name length, name,
// u32 rank, u32 extents, f64 values | CRC32

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  ByteWriter w;
  w.magic("CKP1");
  nlohmann::json header = {{"config", network_config_to_json(params.config)},
                           {"init_seed", params.init_seed},
                           {"classes", params.config.classes},
                           {"meta", meta}};
  std::string hs = header.dump();
  w.u32(static_cast<std::uint32_t>(hs.size()));
  w.bytes(hs.data(), hs.size());
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const std::string& name = params.names[i];
    const Tensor& t = params.tensors[i];
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) w.u32(static_cast<std::uint32_t>(e));
    for (double v : t.data) w.f64(v);
  }
  w.append_crc();
  w.save(path);
}

inline ModelParams load_checkpoint(const std::filesystem::path& path,
                                   nlohmann::json* meta_out = nullptr) {
  ByteReader r = ByteReader::from_file(path);
  r.check_crc_trailer();
  r.expect_magic("CKP1");
  std::uint32_t hlen = r.u32();
  std::string hs(hlen, '\0');
  r.raw(hs.data(), hlen);
  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  require(!header.is_discarded(), errc::bad_format, path.string() + ": bad header JSON");

  ModelParams p;
  p.config = network_config_from_json(header.at("config"));
  p.init_seed = header.at("init_seed");
  if (meta_out) *meta_out = header.value("meta", nlohmann::json::object());

  std::uint32_t count = r.u32();
  p.names.reserve(count);
  p.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t nlen = r.u32();
    std::string name(nlen, '\0');
    r.raw(name.data(), nlen);
    std::uint32_t rank = r.u32();
    require(rank >= 1 && rank <= 5, errc::bad_format, path.string() + ": bad tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.u32();
      n *= e;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    p.names.push_back(std::move(name));
    p.tensors.emplace_back(std::move(shape), std::move(data));
  }

  // Cross-check the declared architecture against the stored tensors.
  ModelParams ref = init_params(p.config, p.init_seed);
  require(ref.names == p.names, errc::bad_format,
          path.string() + ": tensor names do not match the declared config");
  for (std::size_t i = 0; i < ref.tensors.size(); ++i)
    require(ref.tensors[i].shape == p.tensors[i].shape, errc::bad_format,
            path.string() + ": tensor shape does not match the declared config");
  return p;
}

// Fine-tuning entry point: loads every tensor except the final affine layer
// and reinitializes that layer for a new class count.
inline ModelParams load_checkpoint_transfer(const std::filesystem::path& path,
                                            std::size_t new_classes, std::uint64_t head_seed) {
  ModelParams base = load_checkpoint(path);
  NetworkConfig cfg = base.config;
  cfg.classes = new_classes;
  ModelParams fresh = init_params(cfg, head_seed);
  // keep everything but the head
  for (std::size_t i = 0; i + 2 < base.tensors.size(); ++i) fresh.tensors[i] = base.tensors[i];
  fresh.init_seed = head_seed;
  return fresh;
}

}  // namespace csvid
