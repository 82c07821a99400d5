#include "mtd/relation.hpp"

namespace mtd {

const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::bce: return "bce";
    case LossMode::prioritized_bce: return "prioritized-bce";
    case LossMode::cross_entropy: return "cross-entropy";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "bce") return LossMode::bce;
  if (s == "prioritized-bce") return LossMode::prioritized_bce;
  if (s == "cross-entropy") return LossMode::cross_entropy;
  throw ConfigError("unknown loss mode '" + std::string(s) + "' (expected bce, prioritized-bce or cross-entropy)");
}

void RelationSpec::validate() const {
  const std::string where = "relation '" + name + "'";
  if (name.empty()) throw ConfigError("relation name must not be empty");
  if (class_count < 1) throw ConfigError(where + ": class_count must be >= 1");
  if (!(weight >= 0.0)) throw ConfigError(where + ": weight must be >= 0");
  if (kind == LabelKind::binary && class_count != 1) throw ConfigError(where + ": binary relations have class_count 1");
  if (loss == LossMode::prioritized_bce && kind != LabelKind::binary)
    throw ConfigError(where + ": prioritized-bce is only valid for binary relations");
  if ((loss == LossMode::cross_entropy) != (kind == LabelKind::categorical))
    throw ConfigError(where + ": categorical relations use cross-entropy and only they do");
}

}  // namespace mtd
