#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "yinyang/neural/checkpoint.hpp"
#include "yinyang/neural/data.hpp"

namespace yinyang::neural {

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double grad_clip_norm = 3.0;
  int batch_size = 16;
  int patience = 3;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  int max_shift = 12;  // pitch-shift augmentation, semitones
  std::size_t max_context_phrases = 4;
  double max_seconds = 0;  // wall-clock budget for the epoch loop; 0 = none

  // Throws DataError on nonpositive learning rate, clip norm, or batch size.
  void validate() const;
  nlohmann::json to_json() const;
  // Fields absent from `j` keep the value in `base`.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }
};

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" or "validation"
  double loss = 0;
  double accuracy = 0;
  nlohmann::json to_json() const;
};

struct TrainingResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double initial_validation_loss = 0;
  double best_validation_loss = 0;
  double best_validation_accuracy = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  bool hit_time_budget = false;
  nlohmann::json to_json() const;  // summary for checkpoint metadata
};

// Called with the epoch number (1-based) to produce that epoch's examples.
template <typename Example>
using ExampleSource = std::function<std::vector<Example>(int epoch)>;

// Mini-batch AdamW with gradient clipping and early stopping on validation
// loss. Epoch 0 is the untrained validation pass. The best weights are
// restored at the end. Log lines go to `log_path` as JSON records if given.
// Throws ModelError if the loss becomes non-finite.
TrainingResult fit(Seq2Seq& model, const ExampleSource<SequenceExample>& train,
                   const std::vector<SequenceExample>& validation, const TrainConfig& config,
                   const std::optional<std::filesystem::path>& log_path = std::nullopt);
TrainingResult fit(Classifier& model, const ExampleSource<PairExample>& train, const std::vector<PairExample>& validation,
                   const TrainConfig& config, const std::optional<std::filesystem::path>& log_path = std::nullopt);

LossStats evaluate(const Seq2Seq& model, std::span<const SequenceExample> examples);
LossStats evaluate(const Classifier& model, std::span<const PairExample> examples);

template <typename Model>
struct Trained {
  std::unique_ptr<Model> model;
  TrainingResult result;
};

Trained<Seq2Seq> train_generator(std::span<const Song> train, std::span<const Song> validation,
                                 const ModelConfig& model_config, const TrainConfig& config,
                                 const std::optional<std::filesystem::path>& log_path = std::nullopt);
Trained<Seq2Seq> train_refiner(std::span<const Song> train, std::span<const Song> validation,
                               const ModelConfig& model_config, const TrainConfig& config,
                               RefinerTask task = RefinerTask::corruption,
                               const std::optional<std::filesystem::path>& log_path = std::nullopt);
Trained<Classifier> train_selector(std::span<const Song> train, std::span<const Song> validation,
                                   const ModelConfig& model_config, const TrainConfig& config,
                                   const std::optional<std::filesystem::path>& log_path = std::nullopt);
Trained<Classifier> train_sd(std::span<const Song> train, std::span<const Song> validation,
                             const ModelConfig& model_config, const TrainConfig& config,
                             const std::optional<std::filesystem::path>& log_path = std::nullopt);

}  // namespace yinyang::neural
