#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifx/common.hpp"

namespace ifx {

enum class ResourceLevel { high, low, unknown };

std::string_view to_string(ResourceLevel level);
ResourceLevel parse_resource_level(std::string_view s);

// Full script name for a four-letter script tag ("Latn" -> "Latin"); empty if
// the tag is not in the built-in table.
std::string_view script_name(std::string_view tag);

struct LanguageSpec {
  std::string code;    // name_Script, e.g. syn1_Latn
  std::string script;  // label used for grouping, e.g. Latin
  std::string family;  // empty = unaffiliated
  ResourceLevel resource_level = ResourceLevel::unknown;
  std::string corpus_source;  // file path or "synth:..." reference

  std::string_view script_tag() const;
};

// Throws ifx::Error when the code is malformed or the script label does not
// correspond to the code's suffix.
void validate(const LanguageSpec& spec);

class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<LanguageSpec> specs);

  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  const LanguageSpec& operator[](std::size_t i) const { return specs_[i]; }
  const std::vector<LanguageSpec>& specs() const { return specs_; }
  auto begin() const { return specs_.begin(); }
  auto end() const { return specs_.end(); }

  std::optional<std::size_t> index_of(std::string_view code) const;
  const LanguageSpec& at(std::string_view code) const;
  bool contains(std::string_view code) const { return index_of(code).has_value(); }
  std::vector<std::string> codes() const;

  // Same registry without the listed codes; order of the rest is kept.
  Registry without(const std::vector<std::string>& excluded) const;

  // Digest of the CSV rendering; identical for identical registries.
  std::uint64_t hash() const;

  // Directory that relative corpus paths are resolved against.
  std::filesystem::path base_dir;

 private:
  std::vector<LanguageSpec> specs_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kRegistryHeader = "code,script,family,resource_level,corpus_source";

Registry parse_registry(std::string_view text);
Registry load_registry(const std::filesystem::path& path);
std::string to_csv(const Registry& registry);

enum class GroupKey { script, family, resource_level };

std::string_view to_string(GroupKey key);
GroupKey parse_group_key(std::string_view s);

struct Group {
  std::string label;
  std::vector<std::string> codes;
};
// Groups in order of first appearance; codes in registry order.
using Grouping = std::vector<Group>;

// Partition of the codes carrying the chosen attribute. Languages with an
// empty family are left out of the family grouping. Resource level
// `unknown` forms its own group here; resource statistics drop it.
Grouping group_by(const Registry& registry, GroupKey key);

}  // namespace ifx
