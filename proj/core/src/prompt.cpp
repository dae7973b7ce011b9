#include "ilr/prompt.hpp"

#include <algorithm>

#include "ilr/error.hpp"

namespace ilr {

namespace {

constexpr std::string_view kPreamble =
    "Here is the user's item interaction history in chronological order.";
constexpr std::string_view kRecInstruction =
    "Generate a recommendation token for the next item to be consumed.";

void append(std::vector<TokenId>& dst, const std::vector<TokenId>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

std::string attribute_text(const ItemRecord& item) {
  std::string out = item.brand;
  if (!item.category.empty()) {
    if (!out.empty()) {
      out += ", ";
    }
    out += item.category;
  }
  return out;
}

std::string property_value(const ItemRecord& item, Property p) {
  switch (p) {
    case Property::Brand:
      return item.brand;
    case Property::Category:
      return item.category;
    case Property::Title:
      return item.title;
    case Property::Description:
      return item.description;
  }
  return {};
}

// History segments for prefix, newest kept first until `room` is exhausted.
void append_history(PromptPlan& plan, const Vocabulary& vocab, const Catalog& catalog,
                    const std::vector<std::string>& prefix, std::size_t room) {
  std::vector<ItemSegment> segments;
  segments.reserve(prefix.size());
  for (const auto& id : prefix) {
    segments.push_back(build_item_segment(vocab, catalog.at(id), plan.mode));
  }
  std::size_t used = 0;
  std::size_t first = segments.size();
  while (first > 0 && used + segments[first - 1].tokens.size() <= room) {
    used += segments[first - 1].tokens.size();
    --first;
  }
  plan.dropped_items = first;
  plan.retained_items = segments.size() - first;
  for (std::size_t i = first; i < segments.size(); ++i) {
    const std::size_t base = plan.tokens.size();
    append(plan.tokens, segments[i].tokens);
    for (auto s : segments[i].slots) {
      s.position += base;
      plan.slots.push_back(std::move(s));
    }
  }
}

PromptPlan history_with_suffix(const Vocabulary& vocab, const Catalog& catalog,
                               const std::vector<std::string>& prefix, Mode mode,
                               std::size_t budget, std::size_t suffix_len) {
  if (prefix.empty()) {
    fail(ErrorKind::Argument, "prompt: empty interaction prefix");
  }
  PromptPlan plan;
  plan.mode = mode;
  plan.tokens.push_back(tokens::kBos);
  append(plan.tokens, tokenize(vocab, kPreamble));
  const std::size_t fixed = plan.tokens.size() + suffix_len;
  const std::size_t newest = build_item_segment(vocab, catalog.at(prefix.back()), mode).tokens.size();
  if (budget < fixed + newest) {
    fail(ErrorKind::Argument, "prompt: context budget " + std::to_string(budget) +
                                  " cannot hold the scaffold (" + std::to_string(fixed) +
                                  " tokens) plus one item segment (" + std::to_string(newest) +
                                  " tokens)");
  }
  append_history(plan, vocab, catalog, prefix, budget - fixed);
  return plan;
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Image:
      return "image";
    case Mode::Attribute:
      return "attribute";
    case Mode::Description:
      return "description";
    case Mode::ImageDescription:
      return "image+description";
  }
  return "?";
}

Mode parse_mode(std::string_view s) {
  if (s == "image") return Mode::Image;
  if (s == "attribute") return Mode::Attribute;
  if (s == "description") return Mode::Description;
  if (s == "image+description" || s == "image_description") return Mode::ImageDescription;
  fail(ErrorKind::Config, "unknown mode '" + std::string(s) + "'");
}

std::optional<std::size_t> PromptPlan::rec_position() const {
  for (const auto& s : slots) {
    if (s.kind == SlotKind::Rec) {
      return s.position;
    }
  }
  return std::nullopt;
}

std::string_view task_preamble() { return kPreamble; }
std::string_view rec_instruction() { return kRecInstruction; }

ItemSegment build_item_segment(const Vocabulary& vocab, const ItemRecord& item, Mode mode) {
  ItemSegment seg;
  const std::string head = "Title: " + item.title + ", ";
  auto add_visual = [&] {
    append(seg.tokens, tokenize(vocab, head + "Visual Representation:"));
    seg.slots.push_back({seg.tokens.size(), SlotKind::Visual, item.item_id});
    seg.tokens.push_back(tokens::kVisual);
    seg.content_tokens += 1;
  };
  auto add_description = [&](std::string_view label) {
    if (item.description.empty()) {
      fail(ErrorKind::Argument, "item " + item.item_id + " has no description");
    }
    append(seg.tokens, tokenize(vocab, label));
    const auto body = tokenize(vocab, item.description);
    append(seg.tokens, body);
    seg.content_tokens += body.size();
  };
  switch (mode) {
    case Mode::Image:
      add_visual();
      break;
    case Mode::Attribute: {
      append(seg.tokens, tokenize(vocab, head + "Attributes:"));
      const auto body = tokenize(vocab, attribute_text(item));
      append(seg.tokens, body);
      seg.content_tokens = body.size();
      break;
    }
    case Mode::Description:
      add_description(head + "Description:");
      break;
    case Mode::ImageDescription:
      add_visual();
      add_description(", Description:");
      break;
  }
  return seg;
}

PromptPlan build_history_prompt(const Vocabulary& vocab, const Catalog& catalog,
                                const std::vector<std::string>& prefix, Mode mode,
                                std::size_t context_budget) {
  PromptPlan plan = history_with_suffix(vocab, catalog, prefix, mode, context_budget, 0);
  plan.target_mask.assign(plan.tokens.size(), false);
  return plan;
}

PromptPlan build_rec_plan(const Vocabulary& vocab, const Catalog& catalog,
                          const std::vector<std::string>& prefix, Mode mode,
                          std::size_t context_budget) {
  const auto instruction = tokenize(vocab, kRecInstruction);
  PromptPlan plan =
      history_with_suffix(vocab, catalog, prefix, mode, context_budget, instruction.size() + 1);
  append(plan.tokens, instruction);
  plan.slots.push_back({plan.tokens.size(), SlotKind::Rec, {}});
  plan.tokens.push_back(tokens::kRec);
  plan.target_mask.assign(plan.tokens.size(), false);
  return plan;
}

RisaPair build_risa_pair(const Vocabulary& vocab, const Catalog& catalog,
                         const std::vector<std::string>& prefix, const ItemRecord& next_item,
                         Rng& rng, Mode mode, std::size_t context_budget,
                         const RisaTemplateSet& templates) {
  const bool any = std::any_of(kProperties.begin(), kProperties.end(),
                               [&](Property p) { return !property_value(next_item, p).empty(); });
  if (!any) {
    fail(ErrorKind::Argument, "RISA: item " + next_item.item_id + " has no usable property");
  }
  std::size_t index = uniform_index(rng, templates.size());
  for (int tries = 1; property_value(next_item, templates[index].property).empty(); ++tries) {
    if (tries >= 20) {
      // Fall back to the first template whose property is present.
      for (std::size_t i = 0; i < templates.size(); ++i) {
        if (!property_value(next_item, templates[i].property).empty()) {
          index = i;
          break;
        }
      }
      break;
    }
    index = uniform_index(rng, templates.size());
  }
  const RisaTemplate& t = templates[index];
  const auto question = tokenize(vocab, t.question);
  auto target = tokenize(vocab, render_answer(t, property_value(next_item, t.property)));
  if (t.property == Property::Description && target.size() > kDescriptionTargetTokens) {
    target.resize(kDescriptionTargetTokens);
  }

  RisaPair pair;
  pair.property = t.property;
  pair.template_index = index;
  pair.plan = history_with_suffix(vocab, catalog, prefix, mode, context_budget,
                                  question.size() + target.size());
  append(pair.plan.tokens, question);
  pair.plan.target_mask.assign(pair.plan.tokens.size(), false);
  append(pair.plan.tokens, target);
  pair.plan.target_mask.resize(pair.plan.tokens.size(), true);
  pair.target = std::move(target);
  return pair;
}

TokenCount count_item_tokens(const Vocabulary& vocab, const ItemRecord& item, Mode mode) {
  const ItemSegment seg = build_item_segment(vocab, item, mode);
  return {seg.tokens.size(), seg.content_tokens};
}

std::vector<std::string> prompt_corpus(const Catalog& catalog, const RisaTemplateSet& templates) {
  std::vector<std::string> corpus{std::string(kPreamble), std::string(kRecInstruction),
                                  "Title: , Visual Representation: Attributes: Description:"};
  for (const auto& t : templates.all()) {
    corpus.push_back(t.question);
    corpus.push_back(t.answer);
  }
  for (const auto& item : catalog.items()) {
    corpus.push_back(item.title);
    corpus.push_back(item.brand);
    corpus.push_back(item.category);
    corpus.push_back(item.description);
  }
  return corpus;
}

}  // namespace ilr
