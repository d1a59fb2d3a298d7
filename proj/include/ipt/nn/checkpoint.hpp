#pragma once

// Checkpoint layout:
//   "TFNN" | u32 version | u64 json length | JSON network description |
//   every parameter tensor in layer order as little-endian f64.

#include <bit>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>

#include "ipt/core/error.hpp"
#include "ipt/core/text.hpp"
#include "ipt/nn/network.hpp"

namespace ipt::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline LayerKind layer_kind_from_name(std::string_view name) {
  for (auto k : {LayerKind::CONV2D, LayerKind::MAXPOOL2X2, LayerKind::DROPOUT, LayerKind::DENSE, LayerKind::RELU,
                 LayerKind::FLATTEN, LayerKind::BILSTM, LayerKind::SOFTMAX})
    if (layer_kind_name(k) == name) return k;
  fail(Errc::config, "unknown layer kind '" + std::string(name) + "'");
}

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
  nlohmann::json j{{"kind", layer_kind_name(s.kind)}};
  switch (s.kind) {
    case LayerKind::CONV2D:
      j["filters"] = s.filters;
      j["kernel"] = {s.kernel_h, s.kernel_w};
      j["padding"] = s.padding == Padding::SAME ? "SAME" : "VALID";
      break;
    case LayerKind::DENSE: j["units"] = s.units; break;
    case LayerKind::DROPOUT: j["rate"] = s.rate; break;
    case LayerKind::BILSTM:
      j["hidden"] = s.hidden;
      j["clip_norm"] = s.clip_norm;
      break;
    default: break;
  }
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  try {
    const LayerKind kind = layer_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
      case LayerKind::CONV2D: {
        const auto pad = j.value("padding", std::string("SAME"));
        if (pad != "SAME" && pad != "VALID") fail(Errc::config, "unknown padding '" + pad + "'");
        return LayerSpec::conv2d(j.at("filters").get<std::size_t>(), j.at("kernel").at(0).get<std::size_t>(),
                                 j.at("kernel").at(1).get<std::size_t>(), pad == "SAME" ? Padding::SAME : Padding::VALID);
      }
      case LayerKind::DENSE: return LayerSpec::dense(j.at("units").get<std::size_t>());
      case LayerKind::DROPOUT: return LayerSpec::dropout(j.at("rate").get<double>());
      case LayerKind::BILSTM: return LayerSpec::bilstm(j.at("hidden").get<std::size_t>(), j.value("clip_norm", 5.0));
      case LayerKind::MAXPOOL2X2: return LayerSpec::maxpool2x2();
      case LayerKind::RELU: return LayerSpec::relu();
      case LayerKind::FLATTEN: return LayerSpec::flatten();
      case LayerKind::SOFTMAX: return LayerSpec::softmax();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad layer description: ") + e.what());
  }
  fail(Errc::config, "bad layer description");
}

inline nlohmann::json network_spec_to_json(const NetworkSpec& spec) {
  auto list = [](const std::vector<LayerSpec>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back(layer_spec_to_json(s));
    return a;
  };
  return {{"input_shape", spec.input_shape},
          {"trunk", list(spec.trunk)},
          {"regression_head", list(spec.regression_head)},
          {"activity_head", list(spec.activity_head)}};
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  auto list = [](const nlohmann::json& a) {
    std::vector<LayerSpec> v;
    for (const auto& s : a) v.push_back(layer_spec_from_json(s));
    return v;
  };
  try {
    NetworkSpec spec;
    spec.input_shape = j.at("input_shape").get<Shape>();
    spec.trunk = list(j.at("trunk"));
    spec.regression_head = list(j.at("regression_head"));
    spec.activity_head = list(j.at("activity_head"));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad network description: ") + e.what());
  }
}

/// A network plus free-form metadata stored alongside it.
struct Checkpoint {
  Network network;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string serialize_checkpoint(const Network& net, const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json header = network_spec_to_json(net.spec());
  header["seed"] = net.seed();
  header["extra"] = extra;
  const std::string text = header.dump();
  std::string out = "TFNN";
  auto put = [&out](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  };
  put(kCheckpointVersion, 4);
  put(text.size(), 8);
  out += text;
  for (const Tensor* p : net.parameters())
    for (double v : p->values()) put(std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  auto get = [&bytes](std::size_t pos, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
  };
  if (bytes.size() < 16 || bytes.substr(0, 4) != "TFNN") fail(Errc::parse, "not a model checkpoint");
  const auto version = static_cast<std::uint32_t>(get(4, 4));
  if (version != kCheckpointVersion) fail(Errc::parse, "unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t len = get(8, 8);
  if (bytes.size() - 16 < len) fail(Errc::parse, "truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck{Network(network_spec_from_json(header), header.value("seed", std::uint64_t{0})),
                header.value("extra", nlohmann::json::object())};
  std::size_t pos = 16 + len;
  const std::size_t need = ck.network.parameter_count() * 8;
  if (bytes.size() - pos != need)
    fail(Errc::parse, "checkpoint holds " + std::to_string(bytes.size() - pos) + " parameter bytes, expected " +
                          std::to_string(need));
  for (Tensor* p : ck.network.parameters())
    for (double& v : p->values()) {
      v = std::bit_cast<double>(get(pos, 8));
      pos += 8;
    }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Network& net, const nlohmann::json& extra = nlohmann::json::object()) {
  text::write_file(path, serialize_checkpoint(net, extra));
}

inline Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(text::read_file(path)); }

}  // namespace ipt::nn
