#include "simopac/triage.hpp"

#include <algorithm>
#include <sstream>

#include "simopac/timeutil.hpp"

namespace simopac::triage {
namespace {

std::string label_for(const templates::Template* t, std::uint16_t field_id) {
  if (t != nullptr) {
    if (const auto* f = t->find_field(field_id); f != nullptr) return f->name;
  }
  return "field " + std::to_string(field_id);
}

std::string render_code(const CodedValue& c, const term::TerminologyTable* dictionary) {
  std::string system_label;
  if (auto sys = term::system_from_wire(c.system); sys.has_value()) {
    system_label = term::system_name(*sys);
    if (dictionary != nullptr) {
      if (auto entry = dictionary->find_concept(*sys, c.code); entry.has_value())
        return entry->display + " [" + system_label + " " + c.code + "]";
    }
  } else {
    system_label = "system-" + std::to_string(c.system);
  }
  // No dictionary entry: the raw code is still actionable, never dropped.
  return "[" + system_label + " " + c.code + "]";
}

std::string render_value(const FieldValue& v, const term::TerminologyTable* dictionary) {
  switch (v.kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      return std::get<std::string>(v.value);
    case FieldKind::kCode:
      return render_code(std::get<CodedValue>(v.value), dictionary);
    case FieldKind::kDate:
      return format_date_days(std::get<std::int32_t>(v.value));
    case FieldKind::kQuantity: {
      const auto& q = std::get<QuantityValue>(v.value);
      std::ostringstream out;
      out << q.magnitude;
      if (!q.unit.empty()) out << ' ' << q.unit;
      return out.str();
    }
    case FieldKind::kBoolean:
      return std::get<bool>(v.value) ? "yes" : "no";
  }
  return "?";
}

bool is_critical(const templates::Template* t, const FieldValue& v) {
  const std::string label = label_for(t, v.field_id);
  return label == "blood_type" || label == "allergy";
}

}  // namespace

const char* seal_status_name(SealStatus status) {
  switch (status) {
    case SealStatus::kVerified: return "verified";
    case SealStatus::kUnverified: return "unverified";
    case SealStatus::kAbsent: return "absent";
  }
  return "?";
}

codec::CodecResult<TriageView> build_view(std::span<const std::uint8_t> image,
                                          const templates::Template* known_template,
                                          const term::TerminologyTable* dictionary,
                                          std::span<const std::uint8_t> key,
                                          std::int64_t now) {
  auto decoded = codec::decode(image);
  if (!decoded.ok()) return decoded.error();
  const codec::CipPayload& p = decoded.value();

  TriageView view;
  view.sn = p.sn;
  view.emr_reference = identity::format_serial_hex(p.sn) + "@" + p.emr_uri;
  view.template_id = p.template_id;
  view.template_version = p.template_version;
  view.updated_at = static_cast<std::int64_t>(p.updated_at);
  view.staleness_seconds = now - view.updated_at;
  view.stale = view.staleness_seconds > kStaleAfterSeconds;

  if (!p.mac_present) {
    view.seal = SealStatus::kAbsent;
  } else if (key.empty()) {
    view.seal = SealStatus::kUnverified;
  } else {
    auto verified = codec::verify_seal(image, key);
    view.seal = verified.ok() && verified.value() ? SealStatus::kVerified
                                                  : SealStatus::kUnverified;
  }

  // Blood type, then allergies, then everything else in card order.
  std::vector<const FieldValue*> ordered;
  for (const FieldValue& v : p.fields)
    if (label_for(known_template, v.field_id) == "blood_type") ordered.push_back(&v);
  for (const FieldValue& v : p.fields)
    if (label_for(known_template, v.field_id) == "allergy") ordered.push_back(&v);
  for (const FieldValue& v : p.fields)
    if (!is_critical(known_template, v)) ordered.push_back(&v);

  for (const FieldValue* v : ordered) {
    view.lines.push_back(TriageLine{label_for(known_template, v->field_id),
                                    render_value(*v, dictionary),
                                    is_critical(known_template, *v)});
  }
  return view;
}

std::string render_text(const TriageView& view) {
  std::ostringstream out;
  out << "CIP TRIAGE\n";
  out << "  card:      " << view.emr_reference << '\n';
  out << "  template:  " << view.template_id << " v" << int(view.template_version) << '\n';
  out << "  updated:   " << iso8601_utc(view.updated_at) << " ("
      << std::max<std::int64_t>(view.staleness_seconds, 0) / 86400 << " days ago)\n";
  out << "  seal:      " << seal_status_name(view.seal) << '\n';
  if (view.stale)
    out << "  WARNING: tag data is " << view.staleness_seconds / 86400
        << " days old; verify against the EMR when reachable\n";
  if (view.seal == SealStatus::kUnverified)
    out << "  NOTE: seal present but not verified; treat contents as unconfirmed\n";

  bool any_critical = std::any_of(view.lines.begin(), view.lines.end(),
                                  [](const TriageLine& l) { return l.critical; });
  if (any_critical) {
    out << "  VITAL\n";
    for (const TriageLine& l : view.lines)
      if (l.critical) out << "    " << l.label << ": " << l.value << '\n';
  }
  bool any_other = std::any_of(view.lines.begin(), view.lines.end(),
                               [](const TriageLine& l) { return !l.critical; });
  if (any_other) {
    out << "  RECORD\n";
    for (const TriageLine& l : view.lines)
      if (!l.critical) out << "    " << l.label << ": " << l.value << '\n';
  }
  if (view.lines.empty()) out << "  (no fields on card)\n";
  return out.str();
}

}  // namespace simopac::triage
