#pragma once

#include <string>
#include <string_view>

#include "mtd/graph.hpp"

namespace mtd {

enum class LossMode : std::uint8_t { bce, prioritized_bce, cross_entropy };

const char* to_string(LossMode m);
LossMode parse_loss_mode(std::string_view s);

/// One edge-labelling task.
struct RelationSpec {
  std::string name;
  std::size_t class_count = 1;
  LabelKind kind = LabelKind::binary;
  LossMode loss = LossMode::bce;
  double weight = 1.0;

  /// Throws ConfigError when the combination is invalid: prioritized loss on a
  /// non-binary relation, cross-entropy on a non-categorical one, negative
  /// weight, zero classes, or a binary relation with class_count != 1.
  void validate() const;

  friend bool operator==(const RelationSpec&, const RelationSpec&) = default;
};

}  // namespace mtd
