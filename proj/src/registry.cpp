#include "ifx/registry.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "ifx/common.hpp"

namespace ifx {
namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kScripts{{
    {"Latn", "Latin"},    {"Cyrl", "Cyrillic"},   {"Grek", "Greek"},    {"Armn", "Armenian"},
    {"Hebr", "Hebrew"},   {"Arab", "Arabic"},     {"Deva", "Devanagari"}, {"Geor", "Georgian"},
    {"Thai", "Thai"},     {"Hang", "Hangul"},     {"Ethi", "Ethiopic"}, {"Mymr", "Myanmar"},
    {"Laoo", "Lao"},      {"Taml", "Tamil"},      {"Mlym", "Malayalam"}, {"Telu", "Telugu"},
    {"Beng", "Bengali"},  {"Gujr", "Gujarati"},   {"Khmr", "Khmer"},    {"Sinh", "Sinhala"},
    {"Hans", "Han (Simplified)"}, {"Hant", "Han (Traditional)"}, {"Jpan", "Japanese"},
    {"Knda", "Kannada"},
}};

bool is_empty_family(std::string_view f) {
  return f.empty() || f == "-" || f == "\xE2\x80\x93" || f == "\xE2\x80\x94";
}

}  // namespace

std::string_view to_string(ResourceLevel level) {
  switch (level) {
    case ResourceLevel::high: return "high";
    case ResourceLevel::low: return "low";
    case ResourceLevel::unknown: return "unknown";
  }
  return "unknown";
}

ResourceLevel parse_resource_level(std::string_view s) {
  s = trim(s);
  if (s == "high") return ResourceLevel::high;
  if (s == "low") return ResourceLevel::low;
  if (s == "unknown" || s.empty()) return ResourceLevel::unknown;
  throw Error("invalid resource level: '" + std::string(s) + "'");
}

std::string_view script_name(std::string_view tag) {
  for (const auto& [t, name] : kScripts) {
    if (t == tag) return name;
  }
  return {};
}

std::string_view LanguageSpec::script_tag() const {
  const auto pos = code.find('_');
  return pos == std::string::npos ? std::string_view{} : std::string_view(code).substr(pos + 1);
}

void validate(const LanguageSpec& spec) {
  const auto& code = spec.code;
  if (code.empty()) throw Error("language code is empty");
  if (std::count(code.begin(), code.end(), '_') != 1) {
    throw Error("language code must contain exactly one underscore: " + code);
  }
  const auto pos = code.find('_');
  if (pos == 0 || pos + 1 == code.size()) {
    throw Error("language code needs both name and script: " + code);
  }
  const auto tag = spec.script_tag();
  const auto name = script_name(tag);
  if (spec.script != tag && (name.empty() || spec.script != name)) {
    throw Error("script mismatch for " + code + ": label '" + spec.script +
                "' does not match suffix '" + std::string(tag) + "'");
  }
}

Registry::Registry(std::vector<LanguageSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    validate(specs_[i]);
    if (!index_.emplace(specs_[i].code, i).second) {
      throw Error("duplicate language code: " + specs_[i].code);
    }
  }
}

std::optional<std::size_t> Registry::index_of(std::string_view code) const {
  const auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const LanguageSpec& Registry::at(std::string_view code) const {
  const auto i = index_of(code);
  if (!i) throw Error("unknown language code: " + std::string(code));
  return specs_[*i];
}

std::vector<std::string> Registry::codes() const {
  std::vector<std::string> out;
  out.reserve(specs_.size());
  for (const auto& s : specs_) out.push_back(s.code);
  return out;
}

Registry Registry::without(const std::vector<std::string>& excluded) const {
  std::vector<LanguageSpec> kept;
  for (const auto& s : specs_) {
    if (std::find(excluded.begin(), excluded.end(), s.code) == excluded.end()) kept.push_back(s);
  }
  Registry r(std::move(kept));
  r.base_dir = base_dir;
  return r;
}

std::uint64_t Registry::hash() const { return fnv1a(to_csv(*this)); }

Registry parse_registry(std::string_view text) {
  std::vector<LanguageSpec> specs;
  std::size_t line_no = 0;
  bool seen_header = false;
  for (auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != kRegistryHeader) {
        throw Error("registry header must be exactly '" + std::string(kRegistryHeader) + "'");
      }
      seen_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() < 4 || fields.size() > 5) {
      throw Error("malformed registry row " + std::to_string(line_no) + ": expected 4 or 5 fields");
    }
    LanguageSpec spec;
    spec.code = std::string(trim(fields[0]));
    spec.script = std::string(trim(fields[1]));
    const auto family = trim(fields[2]);
    spec.family = is_empty_family(family) ? std::string{} : std::string(family);
    try {
      spec.resource_level = parse_resource_level(fields[3]);
    } catch (const Error& e) {
      throw Error("malformed registry row " + std::to_string(line_no) + ": " + e.what());
    }
    if (fields.size() == 5) spec.corpus_source = std::string(trim(fields[4]));
    specs.push_back(std::move(spec));
  }
  if (!seen_header) throw Error("registry file is empty");
  return Registry(std::move(specs));
}

Registry load_registry(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("registry file not found: " + path.string());
  Registry r = parse_registry(read_file(path));
  r.base_dir = path.parent_path();
  return r;
}

std::string to_csv(const Registry& registry) {
  std::string out(kRegistryHeader);
  out += '\n';
  for (const auto& s : registry) {
    out += s.code + ',' + s.script + ',' + s.family + ',' + std::string(to_string(s.resource_level)) +
           ',' + s.corpus_source + '\n';
  }
  return out;
}

std::string_view to_string(GroupKey key) {
  switch (key) {
    case GroupKey::script: return "script";
    case GroupKey::family: return "family";
    case GroupKey::resource_level: return "resource_level";
  }
  return "script";
}

GroupKey parse_group_key(std::string_view s) {
  if (s == "script") return GroupKey::script;
  if (s == "family") return GroupKey::family;
  if (s == "resource_level" || s == "resource") return GroupKey::resource_level;
  throw Error("unknown grouping key: " + std::string(s));
}

Grouping group_by(const Registry& registry, GroupKey key) {
  Grouping groups;
  for (const auto& spec : registry) {
    std::string label;
    switch (key) {
      case GroupKey::script: {
        const auto name = script_name(spec.script_tag());
        label = name.empty() ? spec.script : std::string(name);
        break;
      }
      case GroupKey::family: label = spec.family; break;
      case GroupKey::resource_level: label = std::string(to_string(spec.resource_level)); break;
    }
    if (key == GroupKey::family && label.empty()) continue;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.label == label; });
    if (it == groups.end()) {
      groups.push_back(Group{label, {spec.code}});
    } else {
      it->codes.push_back(spec.code);
    }
  }
  return groups;
}

}  // namespace ifx
