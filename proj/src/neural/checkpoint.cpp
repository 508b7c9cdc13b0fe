#include "yinyang/neural/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "yinyang/corpus.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/tokenizer.hpp"

namespace yinyang::neural {

using nlohmann::json;
namespace fs = std::filesystem;

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || hidden < 1 || intermediate < 1) throw DataError("model sizes must be positive");
  if (hidden % heads != 0) throw DataError("hidden size must be divisible by the head count");
  if (encoder_context < 16 || decoder_context < 16) throw DataError("model contexts must be at least 16 tokens");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_generator() { return ModelConfig{4, 4, 512, 2048, 2048, 512, 0.1}; }

ModelConfig ModelConfig::full_refiner() { return ModelConfig{4, 4, 512, 2048, 512, 512, 0.1}; }

ModelConfig ModelConfig::full_classifier() { return ModelConfig{4, 4, 512, 2048, 1024, 512, 0.1}; }

json ModelConfig::to_json() const {
  return json{{"layers", layers},
              {"heads", heads},
              {"hidden", hidden},
              {"intermediate", intermediate},
              {"encoder_context", encoder_context},
              {"decoder_context", decoder_context},
              {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "desk") return desk();
    if (name == "full-generator") return full_generator();
    if (name == "full-refiner") return full_refiner();
    if (name == "full-classifier") return full_classifier();
    throw DataError("unknown model preset '" + name + "'");
  }
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.intermediate = j.value("intermediate", c.intermediate);
  c.encoder_context = j.value("encoder_context", c.encoder_context);
  c.decoder_context = j.value("decoder_context", c.decoder_context);
  c.dropout = j.value("dropout", c.dropout);
  c.validate();
  return c;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::generator: return "generator";
    case ModelKind::refiner: return "refiner";
    case ModelKind::selector: return "selector";
    case ModelKind::sd: return "sd";
  }
  return "generator";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::generator, ModelKind::refiner, ModelKind::selector, ModelKind::sd}) {
    if (to_string(k) == text) return k;
  }
  throw DataError("unknown model kind '" + std::string(text) + "'");
}

namespace {

constexpr std::array<char, 4> kMagic{'Y', 'Y', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

fs::path sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw DataError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

// IEEE-754 bits, little-endian, so logits are bit-identical after reload.
void put_floats(std::ostream& out, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data + i, 4);
    put_u32(out, bits);
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const CheckpointInfo& info, const ParamList<float>& params) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    put_floats(out, p->value.data(), static_cast<std::size_t>(p->value.size()));
  }
  if (!out) throw DataError("failed writing " + path.string());

  json meta{{"format", "yinyang-checkpoint"},
            {"version", kFormatVersion},
            {"kind", std::string(to_string(info.kind))},
            {"config", info.config.to_json()},
            {"vocabulary", info.vocabulary},
            {"weights", path.filename().string()},
            {"training", info.training.is_null() ? json::object() : info.training}};
  write_json_file(sidecar(path), meta);
}

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  const json meta = read_json_file(sidecar(path));
  if (meta.value("format", "") != "yinyang-checkpoint") throw DataError(path.string() + ": not a checkpoint sidecar");
  CheckpointInfo info;
  info.kind = parse_model_kind(meta.at("kind").get<std::string>());
  info.config = ModelConfig::from_json(meta.at("config"));
  info.vocabulary = meta.at("vocabulary").get<std::string>();
  info.training = meta.value("training", json::object());
  return info;
}

void load_weights(const fs::path& path, const ParamList<float>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + ": bad checkpoint magic");
  if (get_u32(in) != kFormatVersion) throw DataError(path.string() + ": unsupported checkpoint version");
  const std::uint32_t count = get_u32(in);

  std::map<std::string, Param<float>*> by_name;
  for (auto* p : params) by_name[p->name] = p;
  std::size_t filled = 0;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(get_u32(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError(path.string() + ": unexpected tensor '" + name + "'");
    auto& value = it->second->value;
    if (value.rows() != rows || value.cols() != cols) throw DataError(path.string() + ": shape mismatch for '" + name + "'");
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const std::uint32_t bits = get_u32(in);
      std::memcpy(value.data() + i, &bits, 4);
    }
    ++filled;
  }
  if (filled != params.size()) throw DataError(path.string() + ": checkpoint is missing tensors");
}

namespace {

CheckpointInfo make_info(ModelKind kind, const ModelConfig& config, const json& training) {
  return CheckpointInfo{kind, config, Vocabulary::standard().version(), training.is_null() ? json::object() : training};
}

CheckpointInfo checked_info(const fs::path& path, bool want_classifier) {
  CheckpointInfo info = read_checkpoint_info(path);
  if (info.vocabulary != Vocabulary::standard().version()) {
    throw DataError(path.string() + ": vocabulary '" + info.vocabulary + "' does not match " +
                    Vocabulary::standard().version());
  }
  if (is_classifier(info.kind) != want_classifier) {
    throw DataError(path.string() + ": checkpoint holds a " + std::string(to_string(info.kind)) + " model");
  }
  return info;
}

}  // namespace

void save_seq2seq(const fs::path& path, Seq2Seq& model, ModelKind kind, const json& training) {
  if (is_classifier(kind)) throw DataError("sequence model saved with a classifier kind");
  save_checkpoint(path, make_info(kind, model.config(), training), model.parameters());
}

void save_classifier(const fs::path& path, Classifier& model, ModelKind kind, const json& training) {
  if (!is_classifier(kind)) throw DataError("classifier saved with a sequence model kind");
  save_checkpoint(path, make_info(kind, model.config(), training), model.parameters());
}

std::unique_ptr<Seq2Seq> load_seq2seq(const fs::path& path, CheckpointInfo* info_out) {
  CheckpointInfo info = checked_info(path, false);
  auto model = std::make_unique<Seq2Seq>(info.config, Vocabulary::standard().size(), 0);
  load_weights(path, model->parameters());
  if (info_out) *info_out = std::move(info);
  return model;
}

std::unique_ptr<Classifier> load_classifier(const fs::path& path, CheckpointInfo* info_out) {
  CheckpointInfo info = checked_info(path, true);
  auto model = std::make_unique<Classifier>(info.config, Vocabulary::standard().size(), 0);
  load_weights(path, model->parameters());
  if (info_out) *info_out = std::move(info);
  return model;
}

}  // namespace yinyang::neural
