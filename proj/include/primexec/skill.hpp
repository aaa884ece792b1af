#pragma once

#include "primexec/geometry.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace primexec {

enum class SkillKind { Move, Push, Pull, Press, Rotate, Pick, Place, Open, Close, Done, Reset };

enum class SkillCategory { MotionBased, GripperBased, Control };

enum class RotationDirection { Clockwise, Counterclockwise };

std::string_view to_string(SkillKind kind);
std::string_view to_string(SkillCategory category);

inline constexpr SkillKind kAllSkillKinds[] = {
    SkillKind::Move, SkillKind::Push, SkillKind::Pull, SkillKind::Press, SkillKind::Rotate, SkillKind::Pick,
    SkillKind::Place, SkillKind::Open, SkillKind::Close, SkillKind::Done, SkillKind::Reset};

struct Rotation {
  RotationDirection direction = RotationDirection::Clockwise;
  int degrees = 90;  // integer degrees in (0, 360)
  friend bool operator==(const Rotation&, const Rotation&) = default;
};

/// The `{pos}` placeholder: the literal `<pos>` until a destination is bound.
class PosSlot {
 public:
  PosSlot() = default;
  explicit PosSlot(Destination dest) : dest_(dest) {}

  static PosSlot unresolved() { return PosSlot(); }

  bool resolved() const noexcept { return dest_.has_value(); }
  const Destination& destination() const { return dest_.value(); }

  friend bool operator==(const PosSlot&, const PosSlot&) = default;

 private:
  std::optional<Destination> dest_;
};

/// A parsed planner decision. Construct through the factories; they enforce the per-kind invariants.
struct PrimitiveSkill {
  SkillKind kind = SkillKind::Done;
  std::optional<std::string> object;
  std::optional<std::string> attribute;
  std::optional<std::string> preposition;  // relative Move only
  std::optional<Rotation> rotation;
  std::optional<PosSlot> pos;

  static PrimitiveSkill move_to(PosSlot pos = {});
  static PrimitiveSkill move_relative(std::string preposition, std::string object,
                                      std::optional<std::string> attribute = {}, PosSlot pos = {});
  static PrimitiveSkill push(std::string object, std::optional<std::string> attribute = {}, PosSlot pos = {});
  static PrimitiveSkill pull(std::string object, std::optional<std::string> attribute = {}, PosSlot pos = {});
  static PrimitiveSkill press(std::string object, std::optional<std::string> attribute = {}, PosSlot pos = {});
  static PrimitiveSkill rotate(Rotation rotation, PosSlot pos = {});
  static PrimitiveSkill pick(std::string object, std::optional<std::string> attribute = {});
  static PrimitiveSkill place(std::string object, std::optional<std::string> attribute = {});
  static PrimitiveSkill open();
  static PrimitiveSkill close();
  static PrimitiveSkill done();
  static PrimitiveSkill reset();

  bool has_pos() const noexcept { return pos.has_value(); }
  bool needs_destination() const noexcept { return pos.has_value() && !pos->resolved(); }

  friend bool operator==(const PrimitiveSkill&, const PrimitiveSkill&) = default;
};

SkillCategory classify(SkillKind kind);
inline SkillCategory classify(const PrimitiveSkill& skill) { return classify(skill.kind); }

/// Throws InvariantError when the skill's fields do not fit its kind.
void check_invariants(const PrimitiveSkill& skill);

/// Same skill with its `<pos>` slot resolved. Throws NoSlotError without an unresolved slot.
PrimitiveSkill bind_destination(const PrimitiveSkill& skill, const Destination& dest);

/// Same skill with the slot reset to `<pos>` (no-op for skills without a slot).
PrimitiveSkill unbind_destination(const PrimitiveSkill& skill);

/// Parser/formatter for the primitive-skill language. The relative-move preposition
/// vocabulary is the only configurable part.
class SkillGrammar {
 public:
  SkillGrammar();
  explicit SkillGrammar(std::vector<std::string> prepositions);

  static const std::vector<std::string>& default_prepositions();

  const std::vector<std::string>& prepositions() const noexcept { return prepositions_; }

  /// Throws GrammarError (with byte offset) or RangeError for out-of-bounds literals.
  PrimitiveSkill parse(std::string_view text) const;
  std::string format(const PrimitiveSkill& skill) const;

 private:
  std::vector<std::string> prepositions_;  // sorted longest first
};

const SkillGrammar& default_grammar();

inline PrimitiveSkill parse_skill(std::string_view text) { return default_grammar().parse(text); }
inline std::string format_skill(const PrimitiveSkill& skill) { return default_grammar().format(skill); }

/// `[x, y, d]` with three decimals.
std::string format_destination(const Destination& dest);

}  // namespace primexec
