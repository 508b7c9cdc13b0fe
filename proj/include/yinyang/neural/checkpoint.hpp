#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "yinyang/neural/transformer.hpp"

namespace yinyang::neural {

using Seq2Seq = Seq2SeqTransformer<float>;
using Classifier = EncoderClassifier<float>;

enum class ModelKind { generator, refiner, selector, sd };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
inline bool is_classifier(ModelKind kind) { return kind == ModelKind::selector || kind == ModelKind::sd; }

struct CheckpointInfo {
  ModelKind kind = ModelKind::generator;
  ModelConfig config;
  std::string vocabulary;
  nlohmann::json training = nlohmann::json::object();
};

// Weights go to `path` (binary, named tensors); the JSON sidecar to `path` + ".json".
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info, const ParamList<float>& params);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);
// Fills params by name; every name must be present with matching shape.
void load_weights(const std::filesystem::path& path, const ParamList<float>& params);

void save_seq2seq(const std::filesystem::path& path, Seq2Seq& model, ModelKind kind, const nlohmann::json& training = {});
void save_classifier(const std::filesystem::path& path, Classifier& model, ModelKind kind, const nlohmann::json& training = {});
std::unique_ptr<Seq2Seq> load_seq2seq(const std::filesystem::path& path, CheckpointInfo* info = nullptr);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace yinyang::neural
