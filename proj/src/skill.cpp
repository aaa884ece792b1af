#include "primexec/skill.hpp"

#include "primexec/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

namespace primexec {

std::string_view to_string(SkillKind kind) {
  switch (kind) {
    case SkillKind::Move: return "move";
    case SkillKind::Push: return "push";
    case SkillKind::Pull: return "pull";
    case SkillKind::Press: return "press";
    case SkillKind::Rotate: return "rotate";
    case SkillKind::Pick: return "pick";
    case SkillKind::Place: return "place";
    case SkillKind::Open: return "open";
    case SkillKind::Close: return "close";
    case SkillKind::Done: return "done";
    case SkillKind::Reset: return "reset";
  }
  return "?";
}

std::string_view to_string(SkillCategory category) {
  switch (category) {
    case SkillCategory::MotionBased: return "motion-based";
    case SkillCategory::GripperBased: return "gripper-based";
    case SkillCategory::Control: return "control";
  }
  return "?";
}

SkillCategory classify(SkillKind kind) {
  switch (kind) {
    case SkillKind::Move:
    case SkillKind::Push:
    case SkillKind::Pull:
    case SkillKind::Press:
    case SkillKind::Rotate: return SkillCategory::MotionBased;
    case SkillKind::Pick:
    case SkillKind::Place:
    case SkillKind::Open:
    case SkillKind::Close: return SkillCategory::GripperBased;
    case SkillKind::Done:
    case SkillKind::Reset: return SkillCategory::Control;
  }
  return SkillCategory::Control;
}

// ---------------------------------------------------------------- factories

namespace {

PrimitiveSkill with_object(SkillKind kind, std::string object, std::optional<std::string> attribute) {
  PrimitiveSkill s;
  s.kind = kind;
  s.object = std::move(object);
  s.attribute = std::move(attribute);
  return s;
}

PrimitiveSkill bare(SkillKind kind) {
  PrimitiveSkill s;
  s.kind = kind;
  return s;
}

}  // namespace

PrimitiveSkill PrimitiveSkill::move_to(PosSlot pos) {
  PrimitiveSkill s = bare(SkillKind::Move);
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::move_relative(std::string preposition, std::string object,
                                             std::optional<std::string> attribute, PosSlot pos) {
  PrimitiveSkill s = with_object(SkillKind::Move, std::move(object), std::move(attribute));
  s.preposition = std::move(preposition);
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::push(std::string object, std::optional<std::string> attribute, PosSlot pos) {
  PrimitiveSkill s = with_object(SkillKind::Push, std::move(object), std::move(attribute));
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::pull(std::string object, std::optional<std::string> attribute, PosSlot pos) {
  PrimitiveSkill s = with_object(SkillKind::Pull, std::move(object), std::move(attribute));
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::press(std::string object, std::optional<std::string> attribute, PosSlot pos) {
  PrimitiveSkill s = with_object(SkillKind::Press, std::move(object), std::move(attribute));
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::rotate(Rotation rotation, PosSlot pos) {
  if (rotation.degrees <= 0 || rotation.degrees >= 360) {
    throw RangeError("rotation angle must be in (0, 360) degrees");
  }
  PrimitiveSkill s = bare(SkillKind::Rotate);
  s.rotation = rotation;
  s.pos = pos;
  return s;
}

PrimitiveSkill PrimitiveSkill::pick(std::string object, std::optional<std::string> attribute) {
  return with_object(SkillKind::Pick, std::move(object), std::move(attribute));
}

PrimitiveSkill PrimitiveSkill::place(std::string object, std::optional<std::string> attribute) {
  return with_object(SkillKind::Place, std::move(object), std::move(attribute));
}

PrimitiveSkill PrimitiveSkill::open() { return bare(SkillKind::Open); }
PrimitiveSkill PrimitiveSkill::close() { return bare(SkillKind::Close); }
PrimitiveSkill PrimitiveSkill::done() { return bare(SkillKind::Done); }
PrimitiveSkill PrimitiveSkill::reset() { return bare(SkillKind::Reset); }

void check_invariants(const PrimitiveSkill& s) {
  auto fail = [&](const char* what) {
    throw InvariantError(fmt::format("{} skill: {}", to_string(s.kind), what));
  };
  const bool motion = classify(s) == SkillCategory::MotionBased;
  if (motion != s.pos.has_value()) fail(motion ? "missing pos slot" : "unexpected pos slot");
  if (s.attribute && !s.object) fail("attribute without object");
  switch (s.kind) {
    case SkillKind::Move:
      if (s.preposition.has_value() != s.object.has_value()) fail("relative form needs preposition and object");
      if (s.rotation) fail("unexpected rotation");
      break;
    case SkillKind::Push:
    case SkillKind::Pull:
    case SkillKind::Press:
    case SkillKind::Pick:
    case SkillKind::Place:
      if (!s.object) fail("missing object");
      if (s.preposition || s.rotation) fail("unexpected placeholder");
      break;
    case SkillKind::Rotate:
      if (!s.rotation) fail("missing rotation");
      if (s.rotation->degrees <= 0 || s.rotation->degrees >= 360) fail("angle outside (0, 360)");
      if (s.object || s.preposition) fail("unexpected placeholder");
      break;
    case SkillKind::Open:
    case SkillKind::Close:
    case SkillKind::Done:
    case SkillKind::Reset:
      if (s.object || s.preposition || s.rotation) fail("control and gripper toggles carry no placeholders");
      break;
  }
}

PrimitiveSkill bind_destination(const PrimitiveSkill& skill, const Destination& dest) {
  if (!skill.pos) throw NoSlotError(fmt::format("{} has no pos slot", to_string(skill.kind)));
  if (skill.pos->resolved()) throw NoSlotError(fmt::format("{} pos slot is already resolved", to_string(skill.kind)));
  PrimitiveSkill out = skill;
  out.pos = PosSlot(dest);
  return out;
}

PrimitiveSkill unbind_destination(const PrimitiveSkill& skill) {
  PrimitiveSkill out = skill;
  if (out.pos) out.pos = PosSlot::unresolved();
  return out;
}

std::string format_destination(const Destination& dest) {
  return fmt::format("[{:.3f}, {:.3f}, {:.3f}]", dest.x(), dest.y(), dest.d());
}

// ---------------------------------------------------------------- grammar

namespace {

enum class TokenType { Word, Number, Pos, Literal };

struct Token {
  TokenType type;
  std::string_view text;
  std::size_t offset;
  std::optional<Destination> literal;
};

bool is_space(char c) { return c == ' ' || c == '\t'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// number := digits ["." digits]
double parse_decimal(std::string_view text, std::size_t& i, std::size_t base) {
  const std::size_t begin = i;
  if (i < text.size() && text[i] == '-') ++i;
  const std::size_t int_begin = i;
  while (i < text.size() && is_digit(text[i])) ++i;
  if (i == int_begin) throw GrammarError(base + begin, "expected a decimal number");
  if (i < text.size() && text[i] == '.') {
    ++i;
    const std::size_t frac_begin = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    if (i == frac_begin) throw GrammarError(base + i, "expected digits after '.'");
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data() + begin, text.data() + i, value);
  if (ec != std::errc() || ptr != text.data() + i) throw GrammarError(base + begin, "malformed number");
  return value;
}

Destination parse_literal(std::string_view lit, std::size_t offset) {
  // lit includes the surrounding brackets
  std::size_t i = 1;
  const std::string_view body = lit;
  double v[3];
  for (int k = 0; k < 3; ++k) {
    while (i < body.size() && is_space(body[i])) ++i;
    v[k] = parse_decimal(body, i, offset);
    while (i < body.size() && is_space(body[i])) ++i;
    const char expected = k < 2 ? ',' : ']';
    if (i >= body.size() || body[i] != expected) {
      throw GrammarError(offset + i, fmt::format("expected '{}' in destination literal", expected));
    }
    ++i;
  }
  if (i != body.size()) throw GrammarError(offset + i, "trailing characters after destination literal");
  return Destination(v[0], v[1], v[2]);
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (text[i] == '[') {
      const std::size_t close = text.find(']', i);
      if (close == std::string_view::npos) throw GrammarError(i, "unterminated destination literal");
      const std::string_view lit = text.substr(i, close - i + 1);
      out.push_back({TokenType::Literal, lit, start, parse_literal(lit, start)});
      i = close + 1;
      if (i < text.size() && !is_space(text[i])) throw GrammarError(i, "expected whitespace after ']'");
      continue;
    }
    while (i < text.size() && !is_space(text[i])) ++i;
    const std::string_view raw = text.substr(start, i - start);
    if (raw == "<pos>") {
      out.push_back({TokenType::Pos, raw, start, {}});
    } else if (std::all_of(raw.begin(), raw.end(), is_digit)) {
      out.push_back({TokenType::Number, raw, start, {}});
    } else {
      bool ok = is_lower(raw.front());
      for (char c : raw) ok = ok && (is_lower(c) || c == '_' || c == '-');
      if (!ok) throw GrammarError(start, fmt::format("invalid token '{}'", raw));
      out.push_back({TokenType::Word, raw, start, {}});
    }
  }
  return out;
}

class Cursor {
 public:
  Cursor(const std::vector<Token>& tokens, std::size_t end_offset) : tokens_(tokens), end_offset_(end_offset) {}

  bool at_end() const { return pos_ == tokens_.size(); }
  std::size_t remaining() const { return tokens_.size() - pos_; }
  const Token& peek(std::size_t ahead = 0) const { return tokens_[pos_ + ahead]; }
  std::size_t offset() const { return at_end() ? end_offset_ : peek().offset; }

  void expect_word(std::string_view word) {
    if (at_end() || peek().type != TokenType::Word || peek().text != word) {
      throw GrammarError(offset(), fmt::format("expected '{}'", word));
    }
    ++pos_;
  }

  bool peek_word(std::size_t ahead, std::string_view word) const {
    return pos_ + ahead < tokens_.size() && tokens_[pos_ + ahead].type == TokenType::Word &&
           tokens_[pos_ + ahead].text == word;
  }

  const Token& take() { return tokens_[pos_++]; }

  void expect_end() {
    if (!at_end()) throw GrammarError(offset(), "unexpected trailing text");
  }

  PosSlot take_pos() {
    if (at_end()) throw GrammarError(offset(), "expected <pos> or [x, y, d]");
    const Token& t = peek();
    if (t.type == TokenType::Pos) {
      ++pos_;
      return PosSlot::unresolved();
    }
    if (t.type == TokenType::Literal) {
      ++pos_;
      return PosSlot(*t.literal);
    }
    throw GrammarError(t.offset, "expected <pos> or [x, y, d]");
  }

  // Words up to (not including) the last `tail` tokens. At least one word.
  std::pair<std::string, std::optional<std::string>> take_object_phrase(std::size_t tail) {
    if (remaining() < tail + 1) throw GrammarError(offset(), "expected an object");
    const std::size_t count = remaining() - tail;
    std::vector<std::string_view> words;
    for (std::size_t k = 0; k < count; ++k) {
      const Token& t = take();
      if (t.type != TokenType::Word) throw GrammarError(t.offset, "expected a lowercase word");
      words.push_back(t.text);
    }
    std::string object(words.back());
    words.pop_back();
    if (words.empty()) return {object, std::nullopt};
    return {object, fmt::format("{}", fmt::join(words, " "))};
  }

 private:
  const std::vector<Token>& tokens_;
  std::size_t end_offset_;
  std::size_t pos_ = 0;
};

std::vector<std::string_view> split_words(std::string_view phrase) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < phrase.size()) {
    std::size_t j = phrase.find(' ', i);
    if (j == std::string_view::npos) j = phrase.size();
    out.push_back(phrase.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

}  // namespace

SkillGrammar::SkillGrammar() : SkillGrammar(default_prepositions()) {}

SkillGrammar::SkillGrammar(std::vector<std::string> prepositions) : prepositions_(std::move(prepositions)) {
  for (const auto& p : prepositions_) {
    if (p.empty()) throw InvariantError("empty preposition");
    for (auto w : split_words(p)) {
      if (w.empty() || !is_lower(w.front())) throw InvariantError("preposition must be lowercase words: " + p);
    }
  }
  std::stable_sort(prepositions_.begin(), prepositions_.end(), [](const std::string& a, const std::string& b) {
    return split_words(a).size() > split_words(b).size();
  });
}

const std::vector<std::string>& SkillGrammar::default_prepositions() {
  static const std::vector<std::string> kPrepositions = {
      "on top of", "in front of", "behind", "to the left of", "to the right of", "next to", "inside", "under"};
  return kPrepositions;
}

PrimitiveSkill SkillGrammar::parse(std::string_view text) const {
  const std::vector<Token> tokens = tokenize(text);
  Cursor c(tokens, text.size());
  if (c.at_end()) throw GrammarError(0, "empty decision");
  const Token& verb = c.take();
  if (verb.type != TokenType::Word) throw GrammarError(verb.offset, "expected a skill verb");

  PrimitiveSkill skill;
  if (verb.text == "done" || verb.text == "reset") {
    c.expect_end();
    skill = verb.text == "done" ? PrimitiveSkill::done() : PrimitiveSkill::reset();
  } else if (verb.text == "open" || verb.text == "close") {
    c.expect_word("the");
    c.expect_word("gripper");
    c.expect_end();
    skill = verb.text == "open" ? PrimitiveSkill::open() : PrimitiveSkill::close();
  } else if (verb.text == "pick" || verb.text == "place") {
    c.expect_word("the");
    auto [object, attribute] = c.take_object_phrase(0);
    skill = verb.text == "pick" ? PrimitiveSkill::pick(object, attribute) : PrimitiveSkill::place(object, attribute);
  } else if (verb.text == "push" || verb.text == "pull") {
    c.expect_word("the");
    if (c.remaining() < 4) throw GrammarError(c.offset(), "expected '<object> to the <pos>'");
    auto [object, attribute] = c.take_object_phrase(3);
    c.expect_word("to");
    c.expect_word("the");
    PosSlot pos = c.take_pos();
    skill = verb.text == "push" ? PrimitiveSkill::push(object, attribute, pos)
                                : PrimitiveSkill::pull(object, attribute, pos);
  } else if (verb.text == "press") {
    c.expect_word("the");
    if (c.remaining() < 2) throw GrammarError(c.offset(), "expected '<object> <pos>'");
    auto [object, attribute] = c.take_object_phrase(1);
    skill = PrimitiveSkill::press(object, attribute, c.take_pos());
  } else if (verb.text == "rotate") {
    if (c.at_end() || c.peek().type != TokenType::Word ||
        (c.peek().text != "clockwise" && c.peek().text != "counterclockwise")) {
      throw GrammarError(c.offset(), "expected 'clockwise' or 'counterclockwise'");
    }
    const auto dir = c.take().text == "clockwise" ? RotationDirection::Clockwise : RotationDirection::Counterclockwise;
    if (c.at_end() || c.peek().type != TokenType::Number) throw GrammarError(c.offset(), "expected an integer angle");
    const Token& angle_tok = c.take();
    int degrees = 0;
    auto [ptr, ec] = std::from_chars(angle_tok.text.data(), angle_tok.text.data() + angle_tok.text.size(), degrees);
    if (ec != std::errc() || degrees <= 0 || degrees >= 360) {
      throw RangeError(fmt::format("rotation angle {} outside (0, 360)", angle_tok.text));
    }
    skill = PrimitiveSkill::rotate({dir, degrees}, c.take_pos());
  } else if (verb.text == "move") {
    std::optional<std::string> prep;
    std::size_t prep_len = 0;
    for (const auto& p : prepositions_) {
      const auto words = split_words(p);
      bool match = true;
      for (std::size_t k = 0; k < words.size() && match; ++k) match = c.peek_word(k, words[k]);
      if (match) {
        prep = p;
        prep_len = words.size();
        break;
      }
    }
    if (prep) {
      for (std::size_t k = 0; k < prep_len; ++k) c.take();
      c.expect_word("the");
      auto [object, attribute] = c.take_object_phrase(1);
      skill = PrimitiveSkill::move_relative(*prep, object, attribute, c.take_pos());
    } else if (c.peek_word(0, "to") && c.peek_word(1, "the")) {
      c.take();
      c.take();
      skill = PrimitiveSkill::move_to(c.take_pos());
    } else {
      throw GrammarError(c.offset(), "expected 'to the <pos>' or a preposition after 'move'");
    }
  } else {
    throw GrammarError(verb.offset, fmt::format("unknown skill '{}'", verb.text));
  }
  c.expect_end();
  return skill;
}

std::string SkillGrammar::format(const PrimitiveSkill& s) const {
  auto phrase = [&] {
    return s.attribute ? fmt::format("{} {}", *s.attribute, *s.object) : *s.object;
  };
  auto pos = [&] {
    return s.pos && s.pos->resolved() ? format_destination(s.pos->destination()) : std::string("<pos>");
  };
  switch (s.kind) {
    case SkillKind::Move:
      if (s.preposition) return fmt::format("move {} the {} {}", *s.preposition, phrase(), pos());
      return fmt::format("move to the {}", pos());
    case SkillKind::Push: return fmt::format("push the {} to the {}", phrase(), pos());
    case SkillKind::Pull: return fmt::format("pull the {} to the {}", phrase(), pos());
    case SkillKind::Press: return fmt::format("press the {} {}", phrase(), pos());
    case SkillKind::Rotate:
      return fmt::format("rotate {} {} {}",
                         s.rotation->direction == RotationDirection::Clockwise ? "clockwise" : "counterclockwise",
                         s.rotation->degrees, pos());
    case SkillKind::Pick: return fmt::format("pick the {}", phrase());
    case SkillKind::Place: return fmt::format("place the {}", phrase());
    case SkillKind::Open: return "open the gripper";
    case SkillKind::Close: return "close the gripper";
    case SkillKind::Done: return "done";
    case SkillKind::Reset: return "reset";
  }
  return {};
}

const SkillGrammar& default_grammar() {
  static const SkillGrammar grammar;
  return grammar;
}

}  // namespace primexec
