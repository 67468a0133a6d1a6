#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simopac/identity.hpp"
#include "simopac/result.hpp"
#include "simopac/tag_codec.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"

namespace simopac::triage {

enum class SealStatus { kVerified, kUnverified, kAbsent };

const char* seal_status_name(SealStatus status);

struct TriageLine {
  std::string label;
  std::string value;
  bool critical = false;  // rendered in the lead block
};

/// Tag data past this age gets a prominent warning; emergency data loses
/// value quickly but is still shown.
constexpr std::int64_t kStaleAfterSeconds = 365 * std::int64_t{86400};

/// Everything a responder sees, built from the tag image and an optional
/// offline code dictionary alone. Blood type and allergies lead.
struct TriageView {
  identity::Serial sn{};
  std::string emr_reference;  // SN@URI text for later resolution
  std::uint16_t template_id = 0;
  std::uint8_t template_version = 0;
  std::int64_t updated_at = 0;
  std::int64_t staleness_seconds = 0;
  bool stale = false;
  SealStatus seal = SealStatus::kAbsent;
  std::vector<TriageLine> lines;
};

/// Decodes the image and lays out the view. `dictionary` (concept table) and
/// `known_template` may be null: codes then render raw rather than being
/// dropped. `key` empty means no seal verification is attempted.
codec::CodecResult<TriageView> build_view(std::span<const std::uint8_t> image,
                                          const templates::Template* known_template,
                                          const term::TerminologyTable* dictionary,
                                          std::span<const std::uint8_t> key,
                                          std::int64_t now);

/// Plain-text rendering: critical lines first, staleness and seal state
/// called out.
std::string render_text(const TriageView& view);

}  // namespace simopac::triage
