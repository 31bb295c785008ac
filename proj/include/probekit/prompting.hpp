#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/data_ethics.hpp"

namespace probekit {

inline constexpr std::string_view kPlaceholder = "{}";

struct PromptTemplate {
  std::string id;
  std::string pattern;
  bool operator==(const PromptTemplate&) const = default;
};

/// The five probing templates, in their canonical order.
const std::vector<PromptTemplate>& builtin_templates();

/// Throws InvalidTemplate unless the pattern has exactly one "{}".
void validate_template(const PromptTemplate& tpl);

std::string apply_template(const PromptTemplate& tpl, const Scenario& s);

/// Reads `id<TAB>pattern` lines. Blank lines and lines starting with '#'
/// are ignored.
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);
std::vector<PromptTemplate> parse_templates(std::string_view text);

}  // namespace probekit
