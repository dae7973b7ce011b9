#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ilr {

enum class Property { Brand, Category, Title, Description };

inline constexpr std::array<Property, 4> kProperties{Property::Brand, Property::Category,
                                                     Property::Title, Property::Description};

std::string_view to_string(Property p);
Property parse_property(std::string_view s);

// One question/answer pair. The answer carries a single fill-in marker
// ({BRAND}, {CATEGORY}, {TITLE} or {DESCRIPTION}).
struct RisaTemplate {
  Property property;
  std::string question;
  std::string answer;
};

class RisaTemplateSet {
 public:
  // Parses `property<TAB>question => answer` lines. Exactly 20 entries,
  // five per property, are required.
  static RisaTemplateSet parse(std::string_view tsv);
  static RisaTemplateSet load(const std::string& path);
  // The built-in set, identical to data/risa_templates.tsv.
  static const RisaTemplateSet& builtin();

  const std::vector<RisaTemplate>& all() const { return templates_; }
  std::size_t size() const { return templates_.size(); }
  const RisaTemplate& operator[](std::size_t i) const { return templates_[i]; }

 private:
  std::vector<RisaTemplate> templates_;
};

// Renders the answer with its fill-in replaced by value.
std::string render_answer(const RisaTemplate& t, std::string_view value);

// Text of the built-in template file and of the description summarization
// prompt. The summarization prompt is stored as data only.
std::string_view builtin_template_tsv();
std::string_view summarization_prompt();

}  // namespace ilr
