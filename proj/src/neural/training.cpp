#include "yinyang/neural/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "yinyang/errors.hpp"
#include "yinyang/neural/optimizer.hpp"
#include "yinyang/random.hpp"

namespace yinyang::neural {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw DataError("epochs must be nonnegative");
  if (!(learning_rate > 0)) throw DataError("learning_rate must be positive");
  if (!(grad_clip_norm > 0)) throw DataError("grad_clip_norm must be positive");
  if (weight_decay < 0) throw DataError("weight_decay must be nonnegative");
  if (batch_size < 1) throw DataError("batch_size must be positive");
  if (patience < 1) throw DataError("patience must be positive");
  if (max_shift < 0) throw DataError("max_shift must be nonnegative");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"grad_clip_norm", grad_clip_norm},
              {"batch_size", batch_size},
              {"patience", patience},
              {"seed", seed},
              {"max_shift", max_shift},
              {"max_context_phrases", max_context_phrases},
              {"max_seconds", max_seconds}};
}

TrainConfig TrainConfig::from_json(const json& j, TrainConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.max_shift = j.value("max_shift", c.max_shift);
  c.max_context_phrases = j.value("max_context_phrases", c.max_context_phrases);
  c.max_seconds = j.value("max_seconds", c.max_seconds);
  c.validate();
  return c;
}

json EpochRecord::to_json() const {
  return json{{"epoch", epoch}, {"split", split}, {"loss", loss}, {"accuracy", accuracy}};
}

json TrainingResult::to_json() const {
  return json{{"best_epoch", best_epoch},
              {"initial_validation_loss", initial_validation_loss},
              {"best_validation_loss", best_validation_loss},
              {"best_validation_accuracy", best_validation_accuracy},
              {"epochs_run", epochs_run},
              {"stopped_early", stopped_early},
              {"hit_time_budget", hit_time_budget}};
}

LossStats evaluate(const Seq2Seq& model, std::span<const SequenceExample> examples) {
  LossStats total;
  for (const auto& ex : examples) total += model.evaluate(ex);
  return total;
}

LossStats evaluate(const Classifier& model, std::span<const PairExample> examples) {
  LossStats total;
  for (const auto& ex : examples) total += model.evaluate(ex);
  return total;
}

namespace {

enum Stream : std::uint64_t { kOrder = 10, kDropout = 11, kTrainData = 100, kValidationData = 101, kInit = 102 };

std::size_t example_weight(const SequenceExample& ex) { return ex.target.size(); }
std::size_t example_weight(const PairExample&) { return 1; }

void require_finite(double loss, int epoch, const char* split) {
  if (!std::isfinite(loss)) {
    throw ModelError("training diverged: " + std::string(split) + " loss is " + std::to_string(loss) + " at epoch " +
                     std::to_string(epoch));
  }
}

template <typename Model, typename Example>
TrainingResult fit_impl(Model& model, const ExampleSource<Example>& source, const std::vector<Example>& validation,
                        const TrainConfig& config, const std::optional<std::filesystem::path>& log_path) {
  config.validate();
  if (validation.empty()) throw DataError("validation set is empty");
  const ParamList<float> params = model.parameters();
  AdamW<float> optimizer(params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  std::ofstream log;
  if (log_path) {
    if (log_path->has_parent_path()) std::filesystem::create_directories(log_path->parent_path());
    log.open(*log_path);
    if (!log) throw DataError("cannot write " + log_path->string());
  }
  TrainingResult result;
  auto record = [&](int epoch, const char* split, const LossStats& stats) {
    EpochRecord r{epoch, split, stats.mean_loss(), stats.accuracy()};
    if (log) log << r.to_json().dump() << '\n' << std::flush;
    result.log.push_back(std::move(r));
  };

  const LossStats initial = evaluate(model, validation);
  require_finite(initial.mean_loss(), 0, "validation");
  record(0, "validation", initial);
  result.initial_validation_loss = result.best_validation_loss = initial.mean_loss();
  result.best_validation_accuracy = initial.accuracy();

  std::vector<Matrix<float>> best;
  for (const auto* p : params) best.push_back(p->value);
  int stale = 0;
  const auto start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<Example> examples = source(epoch);
    if (examples.empty()) throw DataError("no training examples could be built");
    Rng order_rng(derive_seed(config.seed, kOrder, static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(std::span<Example>(examples), order_rng);
    Rng dropout_rng(derive_seed(config.seed, kDropout, static_cast<std::uint64_t>(epoch)));
    Rng* dropout = model.config().dropout > 0 ? &dropout_rng : nullptr;

    LossStats train_stats;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (std::size_t from = 0; from < examples.size(); from += batch) {
      const std::size_t to = std::min(examples.size(), from + batch);
      std::size_t weight = 0;
      for (std::size_t i = from; i < to; ++i) weight += example_weight(examples[i]);
      const float scale = 1.0f / static_cast<float>(weight);
      optimizer.zero_grad();
      LossStats batch_stats;
      for (std::size_t i = from; i < to; ++i) batch_stats += model.forward_backward(examples[i], scale, dropout);
      require_finite(batch_stats.loss_sum, epoch, "train");
      clip_grad_norm(params, config.grad_clip_norm);
      optimizer.step();
      train_stats += batch_stats;
    }
    record(epoch, "train", train_stats);

    const LossStats val = evaluate(model, validation);
    require_finite(val.mean_loss(), epoch, "validation");
    record(epoch, "validation", val);
    result.epochs_run = epoch;

    if (val.mean_loss() < result.best_validation_loss) {
      result.best_validation_loss = val.mean_loss();
      result.best_validation_accuracy = val.accuracy();
      result.best_epoch = epoch;
      for (std::size_t i = 0; i < params.size(); ++i) best[i] = params[i]->value;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.stopped_early = true;
      break;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.max_seconds > 0 && elapsed > config.max_seconds) {
      result.hit_time_budget = true;
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return result;
}

ExampleOptions options_for(const TrainConfig& config, int epoch) {
  ExampleOptions o;
  o.max_context_phrases = config.max_context_phrases;
  if (epoch > 0) {
    o.max_shift = config.max_shift;
    o.seed = derive_seed(config.seed, kTrainData, static_cast<std::uint64_t>(epoch));
  } else {
    o.seed = derive_seed(config.seed, kValidationData);
  }
  return o;
}

template <typename Example>
std::vector<Example> checked(std::vector<Example> examples, const char* what) {
  if (examples.empty()) throw DataError(std::string("no ") + what + " examples could be built");
  return examples;
}

Trained<Classifier> train_pairs(std::span<const Song> train, std::span<const Song> validation,
                                const ModelConfig& model_config, const TrainConfig& config, PairPolicy policy,
                                const std::optional<std::filesystem::path>& log_path) {
  config.validate();
  auto val = checked(build_pair_examples(validation, model_config, policy, options_for(config, 0)), "validation");
  Trained<Classifier> out;
  out.model = std::make_unique<Classifier>(model_config, Vocabulary::standard().size(), derive_seed(config.seed, kInit));
  out.result = fit(
      *out.model,
      [&](int epoch) { return build_pair_examples(train, model_config, policy, options_for(config, epoch)); }, val,
      config, log_path);
  return out;
}

}  // namespace

TrainingResult fit(Seq2Seq& model, const ExampleSource<SequenceExample>& train,
                   const std::vector<SequenceExample>& validation, const TrainConfig& config,
                   const std::optional<std::filesystem::path>& log_path) {
  return fit_impl(model, train, validation, config, log_path);
}

TrainingResult fit(Classifier& model, const ExampleSource<PairExample>& train, const std::vector<PairExample>& validation,
                   const TrainConfig& config, const std::optional<std::filesystem::path>& log_path) {
  return fit_impl(model, train, validation, config, log_path);
}

Trained<Seq2Seq> train_generator(std::span<const Song> train, std::span<const Song> validation,
                                 const ModelConfig& model_config, const TrainConfig& config,
                                 const std::optional<std::filesystem::path>& log_path) {
  config.validate();
  auto val = checked(build_generator_examples(validation, model_config, options_for(config, 0)), "validation");
  Trained<Seq2Seq> out;
  out.model = std::make_unique<Seq2Seq>(model_config, Vocabulary::standard().size(), derive_seed(config.seed, kInit));
  out.result = fit(
      *out.model, [&](int epoch) { return build_generator_examples(train, model_config, options_for(config, epoch)); },
      val, config, log_path);
  return out;
}

Trained<Seq2Seq> train_refiner(std::span<const Song> train, std::span<const Song> validation,
                               const ModelConfig& model_config, const TrainConfig& config, RefinerTask task,
                               const std::optional<std::filesystem::path>& log_path) {
  config.validate();
  auto val = checked(build_refiner_examples(validation, model_config, task, options_for(config, 0)), "validation");
  Trained<Seq2Seq> out;
  out.model = std::make_unique<Seq2Seq>(model_config, Vocabulary::standard().size(), derive_seed(config.seed, kInit));
  out.result = fit(
      *out.model,
      [&](int epoch) { return build_refiner_examples(train, model_config, task, options_for(config, epoch)); }, val,
      config, log_path);
  return out;
}

Trained<Classifier> train_selector(std::span<const Song> train, std::span<const Song> validation,
                                   const ModelConfig& model_config, const TrainConfig& config,
                                   const std::optional<std::filesystem::path>& log_path) {
  return train_pairs(train, validation, model_config, config, PairPolicy::consecutive, log_path);
}

Trained<Classifier> train_sd(std::span<const Song> train, std::span<const Song> validation,
                             const ModelConfig& model_config, const TrainConfig& config,
                             const std::optional<std::filesystem::path>& log_path) {
  return train_pairs(train, validation, model_config, config, PairPolicy::same_song, log_path);
}

}  // namespace yinyang::neural
