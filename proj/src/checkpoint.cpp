#include "hyperv2x/checkpoint.hpp"

#include <json.hpp>

#include <cstring>

#include "hyperv2x/io.hpp"

namespace hyperv2x::ckpt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'V', 'X', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save(const std::filesystem::path& path, const Model& m, const std::string& config_echo,
          const std::string& rng_state) {
  Model& mutable_model = const_cast<Model&>(m);
  const auto params = all_params(mutable_model);

  json header;
  header["format"] = "hyperv2x-ckpt-v1";
  header["variant"] = variant_name(m.variant);
  header["fusion_mode"] = m.fusion_mode == fusion::FusionMode::kMax ? "max" : "mean";
  header["features"] = {{"channels", m.fspec.channels},   {"grid_h", m.fspec.grid_h},
                        {"grid_w", m.fspec.grid_w},       {"cell_size_m", m.fspec.cell_size_m},
                        {"obs_channels", m.fspec.obs_channels}, {"enc_width1", m.fspec.enc_width1},
                        {"enc_width2", m.fspec.enc_width2}};
  header["decoder"] = {{"in_channels", m.dspec.in_channels},
                       {"hidden", m.dspec.hidden},
                       {"num_classes", m.dspec.num_classes}};
  header["compression_rate"] = m.comp_cfg.rate;
  header["hyper_hidden"] = m.hyper_hidden;
  header["noise_cond_std"] = m.noise_cond_std;
  header["dropout_rate"] = m.dropout_rate;
  header["manifest_hash"] = io::hex64(m.manifest().hash());
  header["decoder_spec_hash"] = io::hex64(m.dspec.hash());
  header["config_echo"] = config_echo;
  header["rng_state"] = rng_state;

  std::vector<double> payload;
  json dir = json::array();
  for (const auto& p : params) {
    dir.push_back({{"name", p.name},
                   {"shape", p.tensor->shape},
                   {"offset", payload.size()},
                   {"length", p.tensor->numel()}});
    payload.insert(payload.end(), p.tensor->v.begin(), p.tensor->v.end());
  }
  header["tensors"] = dir;
  header["payload_fnv"] =
      io::hex64(io::fnv1a(payload.data(), payload.size() * sizeof(double)));

  const std::string head = header.dump();
  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), kMagic, kMagic + sizeof(kMagic));
  const std::uint64_t head_len = head.size();
  const auto* hl = reinterpret_cast<const std::uint8_t*>(&head_len);
  bytes.insert(bytes.end(), hl, hl + sizeof(head_len));
  bytes.insert(bytes.end(), head.begin(), head.end());
  const auto* pd = reinterpret_cast<const std::uint8_t*>(payload.data());
  bytes.insert(bytes.end(), pd, pd + payload.size() * sizeof(double));
  io::atomic_write(path, bytes);
}

Loaded load(const std::filesystem::path& path) {
  const std::string raw = io::read_file(path);
  if (raw.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  std::uint64_t head_len = 0;
  std::memcpy(&head_len, raw.data() + sizeof(kMagic), sizeof(head_len));
  const std::size_t head_off = sizeof(kMagic) + sizeof(head_len);
  if (raw.size() < head_off + head_len) throw std::runtime_error("checkpoint: truncated header");
  const json header = json::parse(raw.substr(head_off, head_len));
  if (header.at("format").get<std::string>() != "hyperv2x-ckpt-v1")
    throw std::runtime_error("checkpoint: unsupported format");

  fusion::FeatureSpec fspec;
  const auto& jf = header.at("features");
  fspec.channels = jf.at("channels").get<std::int64_t>();
  fspec.grid_h = jf.at("grid_h").get<std::int64_t>();
  fspec.grid_w = jf.at("grid_w").get<std::int64_t>();
  fspec.cell_size_m = jf.at("cell_size_m").get<double>();
  fspec.obs_channels = jf.at("obs_channels").get<std::int64_t>();
  fspec.enc_width1 = jf.at("enc_width1").get<std::int64_t>();
  fspec.enc_width2 = jf.at("enc_width2").get<std::int64_t>();

  dec::DecoderSpec dspec;
  const auto& jd = header.at("decoder");
  dspec.in_channels = jd.at("in_channels").get<std::int64_t>();
  dspec.hidden = jd.at("hidden").get<std::int64_t>();
  dspec.num_classes = jd.at("num_classes").get<std::int64_t>();

  fusion::CompressionConfig comp_cfg;
  comp_cfg.rate = header.at("compression_rate").get<int>();

  Model m = Model::make(variant_from_name(header.at("variant").get<std::string>()), fspec, dspec,
                        comp_cfg, header.at("hyper_hidden").get<std::int64_t>(), -6.0, 0);
  m.fusion_mode = header.at("fusion_mode").get<std::string>() == "mean"
                      ? fusion::FusionMode::kMean
                      : fusion::FusionMode::kMax;
  m.noise_cond_std = header.at("noise_cond_std").get<double>();
  m.dropout_rate = header.at("dropout_rate").get<double>();

  if (header.at("manifest_hash").get<std::string>() != io::hex64(m.manifest().hash()))
    throw std::runtime_error("checkpoint: weight manifest hash mismatch (incompatible decoder spec)");
  if (header.at("decoder_spec_hash").get<std::string>() != io::hex64(m.dspec.hash()))
    throw std::runtime_error("checkpoint: decoder spec hash mismatch");

  const std::size_t payload_off = head_off + head_len;
  const std::size_t payload_count = (raw.size() - payload_off) / sizeof(double);
  std::vector<double> payload(payload_count);
  std::memcpy(payload.data(), raw.data() + payload_off, payload_count * sizeof(double));
  if (header.at("payload_fnv").get<std::string>() !=
      io::hex64(io::fnv1a(payload.data(), payload.size() * sizeof(double))))
    throw std::runtime_error("checkpoint: payload checksum mismatch in " + path.string());

  auto params = all_params(m);
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    bool found = false;
    for (auto& p : params) {
      if (p.name != name) continue;
      if (static_cast<std::size_t>(p.tensor->numel()) != length)
        throw std::runtime_error("checkpoint: tensor size mismatch for " + name);
      std::memcpy(p.tensor->v.data(), payload.data() + offset, length * sizeof(double));
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("checkpoint: unexpected tensor " + name);
  }

  Loaded out;
  out.model = std::move(m);
  out.config_echo = header.at("config_echo").get<std::string>();
  out.rng_state = header.at("rng_state").get<std::string>();
  return out;
}

}  // namespace hyperv2x::ckpt
