#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lobsurv/error.hpp"
#include "lobsurv/models.hpp"

namespace lobsurv {

namespace {

constexpr int kFormatVersion = 1;

void write_f64(std::ostream& out, double v) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[8];
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw DataError("checkpoint data truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

nlohmann::json encoder_json(const EncoderConfig& e) {
  return {{"kind", to_string(e.kind)},
          {"T", e.T},
          {"F", e.F},
          {"latent", e.latent},
          {"kernel", e.kernel},
          {"dilation", e.dilation},
          {"heads", e.heads},
          {"d_k", e.d_k},
          {"layers", e.layers},
          {"mask", to_string(e.mask)},
          {"mlp_hidden", e.mlp_hidden},
          {"cnn_layers", e.cnn_layers},
          {"pooling", e.pooling == Pooling::Last ? "last" : "mean"}};
}

EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig e;
  e.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
  e.T = j.at("T");
  e.F = j.at("F");
  e.latent = j.at("latent");
  e.kernel = j.at("kernel");
  e.dilation = j.at("dilation");
  e.heads = j.at("heads");
  e.d_k = j.at("d_k");
  e.layers = j.at("layers");
  e.mask = mask_kind_from_string(j.at("mask").get<std::string>());
  e.mlp_hidden = j.at("mlp_hidden");
  e.cnn_layers = j.at("cnn_layers");
  e.pooling = j.at("pooling").get<std::string>() == "mean" ? Pooling::Mean : Pooling::Last;
  return e;
}

}  // namespace

void save_checkpoint(const SurvivalModel& model, const std::string& path) {
  const ModelConfig& c = model.config();
  nlohmann::json j;
  j["format"] = "lobsurv-checkpoint";
  j["version"] = kFormatVersion;
  j["encoder"] = encoder_json(c.encoder);
  j["decoder_hidden"] = c.decoder.hidden;
  j["time_scaling"] = "log1p(t)/log1p(t_max)";
  j["feature_names"] = c.feature_names;
  j["standardized"] = !c.feature_mean.empty();
  j["data_file"] = std::filesystem::path(path).filename().string() + ".bin";
  j["dtype"] = "f64-le";

  std::ofstream bin(path + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot write " + path + ".bin");
  std::size_t offset = 0;
  write_f64(bin, c.t_max);
  ++offset;
  for (double v : c.feature_mean) write_f64(bin, v);
  for (double v : c.feature_std) write_f64(bin, v);
  offset += c.feature_mean.size() + c.feature_std.size();
  nlohmann::json params = nlohmann::json::array();
  for (const Param& p : model.params().params()) {
    params.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"positive", p.positive},
                      {"offset", offset}});
    // Row-major so the layout does not depend on Eigen's storage order.
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index col = 0; col < p.value.cols(); ++col) write_f64(bin, p.value(r, col));
    }
    offset += static_cast<std::size_t>(p.value.size());
  }
  j["params"] = params;
  j["count"] = offset;
  if (!bin) throw DataError("failed writing " + path + ".bin");

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

SurvivalModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "lobsurv-checkpoint" || j.value("version", 0) != kFormatVersion) {
    throw DataError("checkpoint " + path + " has an unsupported format");
  }
  std::ifstream bin(path + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint data " + path + ".bin");
  try {
    ModelConfig c;
    c.encoder = encoder_from_json(j.at("encoder"));
    c.decoder.hidden = j.at("decoder_hidden").get<std::vector<int>>();
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    c.t_max = read_f64(bin);
    if (j.at("standardized").get<bool>()) {
      const auto F = static_cast<std::size_t>(c.encoder.F);
      c.feature_mean.resize(F);
      c.feature_std.resize(F);
      for (auto& v : c.feature_mean) v = read_f64(bin);
      for (auto& v : c.feature_std) v = read_f64(bin);
    }
    SurvivalModel model(c, 0);
    const auto& params = j.at("params");
    if (params.size() != model.params().size()) throw DataError("checkpoint parameter count mismatch");
    for (const auto& pj : params) {
      Param& p = model.params().get(pj.at("name").get<std::string>());
      if (pj.at("rows").get<Eigen::Index>() != p.value.rows() || pj.at("cols").get<Eigen::Index>() != p.value.cols() ||
          pj.at("positive").get<bool>() != p.positive) {
        throw DataError("checkpoint parameter '" + p.name + "' does not match the architecture");
      }
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index col = 0; col < p.value.cols(); ++col) p.value(r, col) = read_f64(bin);
      }
    }
    if (bin.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint data has trailing bytes");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " is malformed: " + e.what());
  }
}

}  // namespace lobsurv
