#include "probekit/prompting.hpp"

#include "probekit/error.hpp"
#include "probekit/io.hpp"

namespace probekit {
namespace {

std::size_t count_placeholders(std::string_view pattern) {
  std::size_t count = 0;
  for (auto pos = pattern.find(kPlaceholder); pos != std::string_view::npos;
       pos = pattern.find(kPlaceholder, pos + kPlaceholder.size())) {
    ++count;
  }
  return count;
}

}  // namespace

const std::vector<PromptTemplate>& builtin_templates() {
  static const std::vector<PromptTemplate> kTemplates = {
      {"identity", "{}"},
      {"instantaneous", "Consider the instantaneous pleasantness of \"{}\""},
      {"how_pleasant", "How pleasant is the following scenario? \"{}\""},
      {"better_than", "\"{}\" is better than"},
      {"more_pleasant_than", "\"{}\" is more pleasant than"},
  };
  return kTemplates;
}

void validate_template(const PromptTemplate& tpl) {
  const std::size_t n = count_placeholders(tpl.pattern);
  if (n != 1) {
    throw Error(ErrorKind::InvalidTemplate, "template '" + tpl.id + "' has " + std::to_string(n) +
                                                " placeholders, expected exactly one");
  }
}

std::string apply_template(const PromptTemplate& tpl, const Scenario& s) {
  validate_template(tpl);
  const auto pos = tpl.pattern.find(kPlaceholder);
  std::string out;
  out.reserve(tpl.pattern.size() + s.text.size());
  out.append(tpl.pattern, 0, pos);
  out.append(s.text);
  out.append(tpl.pattern, pos + kPlaceholder.size());
  return out;
}

std::vector<PromptTemplate> parse_templates(std::string_view text) {
  std::vector<PromptTemplate> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw Error(ErrorKind::ParseError, "expected id<TAB>pattern", line_no);
    }
    PromptTemplate tpl{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))};
    try {
      validate_template(tpl);
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidTemplate, e.what(), line_no);
    }
    out.push_back(std::move(tpl));
    if (end == text.size()) break;
  }
  if (out.empty()) throw Error(ErrorKind::InvalidTemplate, "template file lists no templates");
  return out;
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  return parse_templates(read_file(path));
}

}  // namespace probekit
