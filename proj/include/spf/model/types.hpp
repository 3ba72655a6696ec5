#pragma once

#include <cstdint>
#include <string_view>

namespace spf::model {

// 1 annotates bona fide, 0 attack.
enum class Label : std::uint8_t { Attack = 0, BonaFide = 1 };

constexpr int label_index(Label label) noexcept { return static_cast<int>(label); }

constexpr std::string_view to_string(Label label) noexcept {
  return label == Label::BonaFide ? "bona_fide" : "attack";
}

struct Score {
  double p_bona_fide = 0.5;
  double p_attack = 0.5;
};

struct DecisionConfig {
  double threshold = 0.5;  // in (0, 1)
};

// Bona fide only when strictly above the threshold; ties are rejected.
constexpr Label decide(const Score& score, const DecisionConfig& cfg) noexcept {
  return score.p_bona_fide > cfg.threshold ? Label::BonaFide : Label::Attack;
}

}  // namespace spf::model
