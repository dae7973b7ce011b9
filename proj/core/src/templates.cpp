#include "ilr/templates.hpp"

#include <fstream>
#include <sstream>

#include "ilr/error.hpp"

namespace ilr {

namespace {

constexpr std::string_view kTemplateTsv = R"TSV(brand	What brand is this user likely to consume for the next item? => The brand likely to be consumed is '{BRAND}'
brand	Which brand will this user most likely pick for the next purchase? => The brand most likely to be picked is '{BRAND}'
brand	Predict the brand of the next item this user will interact with. => The predicted brand of the next item is '{BRAND}'
brand	Given the history above, what brand does the user prefer next? => The brand preferred next is '{BRAND}'
brand	Name the brand of the item this user is expected to buy next. => The brand expected to be bought next is '{BRAND}'
category	What category is this user likely to consume for the next item? => The category likely to be consumed is '{CATEGORY}'
category	Which category will this user most likely pick for the next purchase? => The category most likely to be picked is '{CATEGORY}'
category	Predict the category of the next item this user will interact with. => The predicted category of the next item is '{CATEGORY}'
category	Given the history above, what category does the user prefer next? => The category preferred next is '{CATEGORY}'
category	Name the category of the item this user is expected to buy next. => The category expected to be bought next is '{CATEGORY}'
title	What is the title of the item this user is likely to consume next? => The title of the item likely to be consumed is '{TITLE}'
title	Which item title will this user most likely pick for the next purchase? => The item title most likely to be picked is '{TITLE}'
title	Predict the title of the next item this user will interact with. => The predicted title of the next item is '{TITLE}'
title	Given the history above, what item title does the user prefer next? => The item title preferred next is '{TITLE}'
title	Name the title of the item this user is expected to buy next. => The title expected to be bought next is '{TITLE}'
description	Describe the item this user is likely to consume next. => The item likely to be consumed is described as '{DESCRIPTION}'
description	What would the description of this user's next item be? => The description of the next item is '{DESCRIPTION}'
description	Predict the description of the next item this user will interact with. => The predicted description of the next item is '{DESCRIPTION}'
description	Given the history above, how would the next preferred item be described? => The next preferred item is described as '{DESCRIPTION}'
description	Write the description of the item this user is expected to buy next. => The item expected to be bought next is described as '{DESCRIPTION}'
)TSV";

constexpr std::string_view kSummarizationPrompt = R"TXT(You are given the metadata of a product from an online store. Write a concise summary of the product in at most three sentences. Keep the details that would help decide whether a shopper with particular tastes would want this product, such as its purpose, style, material and intended audience. Do not invent facts that are not in the metadata.
Title: {TITLE}
Brand: {BRAND}
Category: {CATEGORY}
Description: {DESCRIPTION}
Summary:
)TXT";

constexpr std::string_view kArrow = " => ";

std::string_view marker(Property p) {
  switch (p) {
    case Property::Brand:
      return "{BRAND}";
    case Property::Category:
      return "{CATEGORY}";
    case Property::Title:
      return "{TITLE}";
    case Property::Description:
      return "{DESCRIPTION}";
  }
  return "";
}

}  // namespace

std::string_view to_string(Property p) {
  switch (p) {
    case Property::Brand:
      return "brand";
    case Property::Category:
      return "category";
    case Property::Title:
      return "title";
    case Property::Description:
      return "description";
  }
  return "?";
}

Property parse_property(std::string_view s) {
  for (auto p : kProperties) {
    if (to_string(p) == s) {
      return p;
    }
  }
  fail(ErrorKind::Parse, "unknown property '" + std::string(s) + "'");
}

RisaTemplateSet RisaTemplateSet::parse(std::string_view tsv) {
  RisaTemplateSet set;
  std::array<int, 4> per_property{};
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < tsv.size()) {
    std::size_t end = tsv.find('\n', start);
    if (end == std::string_view::npos) {
      end = tsv.size();
    }
    std::string_view line = tsv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty()) {
      continue;
    }
    const std::string where = "template line " + std::to_string(line_no);
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      fail(ErrorKind::Parse, where + ": missing tab");
    }
    const Property p = parse_property(line.substr(0, tab));
    const std::string_view text = line.substr(tab + 1);
    const std::size_t arrow = text.find(kArrow);
    if (arrow == std::string_view::npos) {
      fail(ErrorKind::Parse, where + ": missing ' => ' between question and answer");
    }
    RisaTemplate t{p, std::string(text.substr(0, arrow)),
                   std::string(text.substr(arrow + kArrow.size()))};
    if (t.question.empty() || t.answer.find(marker(p)) == std::string::npos) {
      fail(ErrorKind::Parse, where + ": answer must contain " + std::string(marker(p)));
    }
    ++per_property[static_cast<std::size_t>(p)];
    set.templates_.push_back(std::move(t));
  }
  if (set.templates_.size() != 20) {
    fail(ErrorKind::Parse,
         "expected 20 templates, found " + std::to_string(set.templates_.size()));
  }
  for (auto p : kProperties) {
    if (per_property[static_cast<std::size_t>(p)] != 5) {
      fail(ErrorKind::Parse, "expected 5 templates for " + std::string(to_string(p)));
    }
  }
  return set;
}

RisaTemplateSet RisaTemplateSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const RisaTemplateSet& RisaTemplateSet::builtin() {
  static const RisaTemplateSet set = parse(kTemplateTsv);
  return set;
}

std::string render_answer(const RisaTemplate& t, std::string_view value) {
  std::string out = t.answer;
  const auto m = marker(t.property);
  const std::size_t at = out.find(m);
  out.replace(at, m.size(), value);
  return out;
}

std::string_view builtin_template_tsv() { return kTemplateTsv; }

std::string_view summarization_prompt() { return kSummarizationPrompt; }

}  // namespace ilr
