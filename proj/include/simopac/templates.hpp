#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "simopac/fields.hpp"
#include "simopac/result.hpp"

namespace simopac::templates {

struct TemplateField {
  std::uint16_t field_id = 0;
  std::string name;
  FieldKind kind = FieldKind::kText;
  bool required = false;
  std::uint8_t priority = 1;  // 1 = most critical
  std::uint16_t max_len = 1;  // cap on encoded value bytes
  bool repeatable = false;
  std::optional<std::uint8_t> code_system;  // set when kind == kCode

  bool operator==(const TemplateField&) const = default;
};

struct Template {
  std::uint16_t template_id = 0;
  std::uint8_t version = 0;
  std::string name;
  std::vector<TemplateField> fields;

  bool operator==(const Template&) const = default;

  const TemplateField* find_field(std::uint16_t field_id) const;
};

enum class RegistryErrorCode {
  kDuplicateTemplateVersion,
  kInvalidTemplate,
  kNotFound,
  kStorageFailure,
};

struct RegistryError {
  RegistryErrorCode code;
  std::string detail;
};

template <typename T>
using RegistryResult = Result<T, RegistryError>;

struct RegistrationReceipt {
  std::uint16_t template_id = 0;
  std::uint8_t version = 0;
  std::size_t field_count = 0;
};

enum class ValueVerdict {
  kUnknownField,
  kKindMismatch,
  kTooLong,
  kMissingRequired,
  kDuplicateNonRepeatable,
};

const char* value_verdict_name(ValueVerdict verdict);

struct ValidationIssue {
  ValueVerdict verdict;
  std::uint16_t field_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool valid() const { return issues.empty(); }
};

ValidationReport validate_values(const Template& t, const std::vector<FieldValue>& values);

/// Fields sorted ascending by priority number, ties broken by field_id.
/// This is the order encode writes and fit_to_budget protects.
std::vector<TemplateField> packing_order(const Template& t);

/// EMERGENCY-1 (id 1, v1): the built-in vital-data template every registry
/// starts with.
Template emergency1();

Result<Template, std::string> template_from_json(const std::string& json_text);
std::string template_to_json(const Template& t);
Result<Template, std::string> load_template_file(const std::string& path);

/// Registered templates are immutable; registration of an existing
/// (id, version) pair is rejected. When constructed with a log path the
/// registry replays it on startup and appends each new registration, so
/// tag images stay decodable across restarts.
class TemplateRegistry {
 public:
  TemplateRegistry();
  static RegistryResult<std::unique_ptr<TemplateRegistry>> open(const std::string& log_path);

  RegistryResult<RegistrationReceipt> register_template(const Template& t);
  RegistryResult<Template> get_template(std::uint16_t template_id,
                                        std::uint8_t version) const;
  std::vector<Template> list() const;

 private:
  RegistryResult<Unit> insert(const Template& t, bool persist);

  mutable std::mutex mutex_;
  std::map<std::pair<std::uint16_t, std::uint8_t>, Template> templates_;
  std::string log_path_;
};

}  // namespace simopac::templates
