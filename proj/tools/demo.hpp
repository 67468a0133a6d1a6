#pragma once

#include <string>

namespace simopac::demo {

/// Scripted two-hospital scenario: ingest at hospital-a, refresh a tag,
/// triage it offline, record the discharge, then resolve the card from
/// hospital-b via a federation referral. Prints a step checklist.
///
/// `argv0` relaunches this binary for the `serve` child processes.
/// `stop_node_a` kills node A after the tag refresh to demonstrate that
/// triage still works offline while resolution fails loudly.
///
/// Returns a process exit code: 0 when every step passes, otherwise the
/// exit-code class of the first failing step.
int run_demo(const std::string& argv0, const std::string& workdir, bool stop_node_a);

}  // namespace simopac::demo
