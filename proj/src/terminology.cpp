#include "simopac/terminology.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace simopac::term {

namespace {

TermError terr(TermErrorCode code, std::size_t line, std::string detail) {
  return TermError{code, line, std::move(detail)};
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool starts_with_fold(const std::string& text, const std::string& prefix) {
  if (prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

struct LineReader {
  std::ifstream in;
  std::size_t line_no = 0;

  explicit LineReader(const std::string& path) : in(path) {}

  bool next(std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
};

}  // namespace

std::optional<SystemId> system_from_name(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (up == "LOCAL") return SystemId::kLocal;
  if (up == "ICD9") return SystemId::kIcd9;
  if (up == "ICD10") return SystemId::kIcd10;
  if (up == "NDL") return SystemId::kNdl;
  return std::nullopt;
}

std::optional<SystemId> system_from_wire(std::uint8_t id) {
  if (id >= 0x01 && id <= 0x04) return static_cast<SystemId>(id);
  return std::nullopt;
}

const char* system_name(SystemId id) {
  switch (id) {
    case SystemId::kLocal: return "LOCAL";
    case SystemId::kIcd9: return "ICD9";
    case SystemId::kIcd10: return "ICD10";
    case SystemId::kNdl: return "NDL";
  }
  return "?";
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::kExact: return "exact";
    case Relation::kBroader: return "broader";
    case Relation::kNarrower: return "narrower";
  }
  return "?";
}

std::optional<Relation> relation_from_name(const std::string& name) {
  if (name == "exact") return Relation::kExact;
  if (name == "broader") return Relation::kBroader;
  if (name == "narrower") return Relation::kNarrower;
  return std::nullopt;
}

TermResult<TerminologyTable> TerminologyTable::load_concepts(
    const std::string& concepts_path) {
  LineReader reader(concepts_path);
  if (!reader.in) {
    return terr(TermErrorCode::kFileMissing, 0, "cannot open " + concepts_path);
  }
  TerminologyTable table;
  std::string line;
  bool header_seen = false;
  while (reader.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // "system code display"
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      return terr(TermErrorCode::kBadRow, reader.line_no,
                  "expected system<TAB>code<TAB>display");
    }
    auto system = system_from_name(cols[0]);
    if (!system) {
      return terr(TermErrorCode::kUnknownSystemName, reader.line_no,
                  "system '" + cols[0] + "'");
    }
    auto key = std::make_pair(*system, cols[1]);
    if (table.concepts_.contains(key)) {
      return terr(TermErrorCode::kDuplicateRow, reader.line_no,
                  "concept " + cols[0] + " " + cols[1] + " repeated");
    }
    table.concepts_[key] = Concept{*system, cols[1], cols[2]};
  }
  table.counts_.concepts = table.concepts_.size();
  return table;
}

TermResult<TerminologyTable> TerminologyTable::load(const std::string& concepts_path,
                                                    const std::string& mappings_path) {
  auto loaded = load_concepts(concepts_path);
  if (!loaded) return loaded.error();
  TerminologyTable table = std::move(loaded).value();

  LineReader reader(mappings_path);
  if (!reader.in) {
    return terr(TermErrorCode::kFileMissing, 0, "cannot open " + mappings_path);
  }
  std::string line;
  bool header_seen = false;
  while (reader.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() != 5 || cols[1].empty() || cols[3].empty()) {
      return terr(TermErrorCode::kBadRow, reader.line_no,
                  "expected from_system<TAB>from_code<TAB>to_system<TAB>to_code<TAB>relation");
    }
    auto from_system = system_from_name(cols[0]);
    auto to_system = system_from_name(cols[2]);
    if (!from_system || !to_system) {
      return terr(TermErrorCode::kUnknownSystemName, reader.line_no,
                  "system '" + (from_system ? cols[2] : cols[0]) + "'");
    }
    auto relation = relation_from_name(cols[4]);
    if (!relation) {
      return terr(TermErrorCode::kBadRow, reader.line_no,
                  "relation '" + cols[4] + "' is not exact|broader|narrower");
    }
    auto key = std::make_tuple(*from_system, cols[1], *to_system);
    if (table.mappings_.contains(key)) {
      return terr(TermErrorCode::kDuplicateRow, reader.line_no,
                  "mapping " + cols[0] + " " + cols[1] + " -> " + cols[2] + " repeated");
    }
    table.mappings_[key] = MappingRow{*from_system, cols[1], *to_system, cols[3], *relation};
  }
  table.counts_.mappings = table.mappings_.size();
  return table;
}

std::optional<Concept> TerminologyTable::find_concept(SystemId system,
                                                      const std::string& code) const {
  auto it = concepts_.find({system, code});
  if (it == concepts_.end()) return std::nullopt;
  return it->second;
}

TermResult<bool> TerminologyTable::validate_code(SystemId system,
                                                 const std::string& code) const {
  return concepts_.contains({system, code});
}

TermResult<TranslationResult> TerminologyTable::translate(SystemId from_system,
                                                          const std::string& code,
                                                          SystemId to_system) const {
  auto source = find_concept(from_system, code);
  if (!source) {
    return TranslationResult{TranslationResult::Outcome::kUnknownSourceCode, std::nullopt};
  }
  if (from_system == to_system) {
    return TranslationResult{TranslationResult::Outcome::kTranslated,
                             Translated{*source, Relation::kExact}};
  }
  auto it = mappings_.find({from_system, code, to_system});
  if (it == mappings_.end()) {
    return TranslationResult{TranslationResult::Outcome::kNotMapped, std::nullopt};
  }
  auto target = find_concept(to_system, it->second.to_code);
  if (!target) {
    // A mapping row pointing at a code missing from the dictionary would
    // fabricate a concept; treat it as unmapped.
    return TranslationResult{TranslationResult::Outcome::kNotMapped, std::nullopt};
  }
  return TranslationResult{TranslationResult::Outcome::kTranslated,
                           Translated{*target, it->second.relation}};
}

TermResult<std::vector<Concept>> TerminologyTable::search(SystemId system,
                                                          const std::string& prefix) const {
  std::vector<Concept> out;
  auto begin = concepts_.lower_bound({system, std::string{}});
  for (auto it = begin; it != concepts_.end() && it->first.first == system; ++it) {
    const Concept& c = it->second;
    if (prefix.empty() || starts_with_fold(c.code, prefix) ||
        starts_with_fold(c.display, prefix)) {
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Concept& a, const Concept& b) { return a.code < b.code; });
  return out;
}

namespace {
TermResult<SystemId> require_system(std::uint8_t id) {
  auto system = system_from_wire(id);
  if (!system) {
    return terr(TermErrorCode::kUnknownSystem, 0,
                "system id " + std::to_string(id) + " is not registered");
  }
  return *system;
}
}  // namespace

TermResult<bool> TerminologyTable::validate_code(std::uint8_t system,
                                                 const std::string& code) const {
  auto resolved = require_system(system);
  if (!resolved) return resolved.error();
  return validate_code(resolved.value(), code);
}

TermResult<TranslationResult> TerminologyTable::translate(std::uint8_t from_system,
                                                          const std::string& code,
                                                          std::uint8_t to_system) const {
  auto from = require_system(from_system);
  if (!from) return from.error();
  auto to = require_system(to_system);
  if (!to) return to.error();
  return translate(from.value(), code, to.value());
}

TermResult<std::vector<Concept>> TerminologyTable::search(std::uint8_t system,
                                                          const std::string& prefix) const {
  auto resolved = require_system(system);
  if (!resolved) return resolved.error();
  return search(resolved.value(), prefix);
}

}  // namespace simopac::term
