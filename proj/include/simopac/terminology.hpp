#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "simopac/result.hpp"

namespace simopac::term {

/// Registered coding systems. Wire ids are the single byte stored in coded
/// tag values.
enum class SystemId : std::uint8_t {
  kLocal = 0x01,
  kIcd9 = 0x02,
  kIcd10 = 0x03,
  kNdl = 0x04,  // national drug list
};

std::optional<SystemId> system_from_name(const std::string& name);
std::optional<SystemId> system_from_wire(std::uint8_t id);
const char* system_name(SystemId id);

struct Concept {
  SystemId system;
  std::string code;
  std::string display;

  bool operator==(const Concept&) const = default;
};

enum class Relation { kExact, kBroader, kNarrower };

const char* relation_name(Relation r);
std::optional<Relation> relation_from_name(const std::string& name);

struct MappingRow {
  SystemId from_system;
  std::string from_code;
  SystemId to_system;
  std::string to_code;
  Relation relation;
};

enum class TermErrorCode {
  kFileMissing,
  kBadRow,
  kDuplicateRow,
  kUnknownSystemName,
  kUnknownSystem,
};

struct TermError {
  TermErrorCode code;
  std::size_t line = 0;
  std::string detail;
};

template <typename T>
using TermResult = Result<T, TermError>;

struct Translated {
  Concept concept_;
  Relation relation;
};

struct TranslationResult {
  enum class Outcome { kTranslated, kNotMapped, kUnknownSourceCode };
  Outcome outcome = Outcome::kNotMapped;
  std::optional<Translated> translated;  // set iff outcome == kTranslated
};

struct LoadCounts {
  std::size_t concepts = 0;
  std::size_t mappings = 0;
};

/// Immutable once loaded; reloads build a new instance and swap it in.
///
/// File formats (TSV with header rows):
///   concepts:  system<TAB>code<TAB>display
///   mappings:  from_system<TAB>from_code<TAB>to_system<TAB>to_code<TAB>relation
class TerminologyTable {
 public:
  static TermResult<TerminologyTable> load(const std::string& concepts_path,
                                           const std::string& mappings_path);

  /// Concept dictionary only; used for the offline triage dictionary.
  static TermResult<TerminologyTable> load_concepts(const std::string& concepts_path);

  LoadCounts counts() const { return counts_; }

  TermResult<bool> validate_code(SystemId system, const std::string& code) const;
  std::optional<Concept> find_concept(SystemId system, const std::string& code) const;

  /// Single-hop translation. Identity within one system is always exact
  /// for known codes; otherwise the mapping table decides.
  TermResult<TranslationResult> translate(SystemId from_system, const std::string& code,
                                          SystemId to_system) const;

  /// Concepts of a system whose code or display starts with the prefix
  /// (case-insensitive), sorted by code. An empty prefix lists the system.
  TermResult<std::vector<Concept>> search(SystemId system, const std::string& prefix) const;

  // Wire-id entry points; reject unregistered system bytes with
  // kUnknownSystem instead of silently coercing.
  TermResult<bool> validate_code(std::uint8_t system, const std::string& code) const;
  TermResult<TranslationResult> translate(std::uint8_t from_system, const std::string& code,
                                          std::uint8_t to_system) const;
  TermResult<std::vector<Concept>> search(std::uint8_t system, const std::string& prefix) const;

 private:
  std::map<std::pair<SystemId, std::string>, Concept> concepts_;
  std::map<std::tuple<SystemId, std::string, SystemId>, MappingRow> mappings_;
  LoadCounts counts_;
};

}  // namespace simopac::term
