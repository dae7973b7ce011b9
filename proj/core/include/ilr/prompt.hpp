#pragma once

// Prompt construction. A PromptPlan is the token sequence the backbone reads
// plus bookkeeping for positions whose embedding is substituted (item
// features at [VISUAL], the learnable vector at [REC]) and for positions that
// are supervised by the language-modelling loss.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ilr/catalog.hpp"
#include "ilr/random.hpp"
#include "ilr/templates.hpp"
#include "ilr/vocab.hpp"

namespace ilr {

enum class Mode { Image, Attribute, Description, ImageDescription };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);  // image, attribute, description, image+description
inline bool has_visual(Mode m) { return m == Mode::Image || m == Mode::ImageDescription; }

enum class SlotKind { Visual, Rec };

struct Slot {
  std::size_t position = 0;
  SlotKind kind = SlotKind::Visual;
  std::string item_id;  // empty for Rec

  bool operator==(const Slot&) const = default;
};

struct PromptPlan {
  std::vector<TokenId> tokens;
  std::vector<Slot> slots;
  std::vector<bool> target_mask;
  Mode mode = Mode::Image;
  std::size_t retained_items = 0;
  std::size_t dropped_items = 0;

  std::size_t size() const { return tokens.size(); }
  std::optional<std::size_t> rec_position() const;

  bool operator==(const PromptPlan&) const = default;
};

inline constexpr std::size_t kUnlimitedBudget = std::numeric_limits<std::size_t>::max();

// Fixed prompt text.
std::string_view task_preamble();
std::string_view rec_instruction();

struct ItemSegment {
  std::vector<TokenId> tokens;
  std::vector<Slot> slots;          // positions relative to the segment start
  std::size_t content_tokens = 0;   // tokens of the representation payload only
};

ItemSegment build_item_segment(const Vocabulary& vocab, const ItemRecord& item, Mode mode);

// BOS, preamble, then item segments oldest to newest. Oldest segments are
// dropped whole until the plan fits the budget.
PromptPlan build_history_prompt(const Vocabulary& vocab, const Catalog& catalog,
                                const std::vector<std::string>& prefix, Mode mode,
                                std::size_t context_budget);

// History prompt, the recommendation instruction, and a final [REC] slot.
PromptPlan build_rec_plan(const Vocabulary& vocab, const Catalog& catalog,
                          const std::vector<std::string>& prefix, Mode mode,
                          std::size_t context_budget);

inline constexpr std::size_t kDescriptionTargetTokens = 32;

struct RisaPair {
  PromptPlan plan;              // history + question + target; mask on target
  std::vector<TokenId> target;  // the supervised tokens
  Property property = Property::Brand;
  std::size_t template_index = 0;
};

// Draws one of the 20 templates uniformly; if the drawn property is empty on
// next_item, draws again (up to 20 tries).
RisaPair build_risa_pair(const Vocabulary& vocab, const Catalog& catalog,
                         const std::vector<std::string>& prefix, const ItemRecord& next_item,
                         Rng& rng, Mode mode = Mode::Image,
                         std::size_t context_budget = kUnlimitedBudget,
                         const RisaTemplateSet& templates = RisaTemplateSet::builtin());

struct TokenCount {
  std::size_t total = 0;
  std::size_t content_only = 0;
};

TokenCount count_item_tokens(const Vocabulary& vocab, const ItemRecord& item, Mode mode);

// Every text fragment that prompts can contain, for vocabulary building.
std::vector<std::string> prompt_corpus(const Catalog& catalog,
                                       const RisaTemplateSet& templates = RisaTemplateSet::builtin());

}  // namespace ilr
