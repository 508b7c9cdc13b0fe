#pragma once

#include <array>
#include <string_view>

namespace yinyang {

// Training-time corruptions shown to the refiner.
enum class CorruptionTag {
  fragmentation,
  permute_pitch,
  permute_duration,
  permute_pitch_duration,
  incorrect_inversion,
  melodic_stripping,
  melodic_addition,
  pitch_masking,
  duration_masking,
  bar_masking,
  same_note_modification,
};

inline constexpr int kCorruptionTagCount = 11;

// Generation-time transformations applied to a motif before refinement.
enum class TransformationKind {
  fragmentation,
  permute_pitch,
  permute_duration,
  permute_pitch_duration,
  chromatic_inversion,
  tonal_inversion,
  retrograde_pitch,
  retrograde_pitch_duration,
  augmentation,
  diminution,
  reduction,
  pitch_masking,
  duration_masking,
  bar_masking,
};

inline constexpr int kTransformationKindCount = 14;

enum class Similarity { high, low };

std::string_view to_string(CorruptionTag tag);
std::string_view to_string(TransformationKind kind);
std::string_view to_string(Similarity similarity);
CorruptionTag parse_corruption_tag(std::string_view text);
// Accepts kebab or snake case ("retrograde-pitch", "retrograde_pitch").
TransformationKind parse_transformation_kind(std::string_view text);

inline constexpr std::array<CorruptionTag, kCorruptionTagCount> all_corruption_tags() {
  std::array<CorruptionTag, kCorruptionTagCount> out{};
  for (int i = 0; i < kCorruptionTagCount; ++i) out[static_cast<std::size_t>(i)] = static_cast<CorruptionTag>(i);
  return out;
}

inline constexpr std::array<TransformationKind, kTransformationKindCount> all_transformation_kinds() {
  std::array<TransformationKind, kTransformationKindCount> out{};
  for (int i = 0; i < kTransformationKindCount; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<TransformationKind>(i);
  }
  return out;
}

}  // namespace yinyang
