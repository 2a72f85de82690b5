#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpicheck/semantics.hpp"

namespace mpicheck {

/// The per-state proof obligations the verifier would discharge statically,
/// checked dynamically here. Premises fire on the head command of the
/// active Seq spine, i.e. before the corresponding transition is taken.
enum class Axiom { AtStart, AtSend, AtRecv, AtWait, AtBarrier, AtEnd, AtSet, AtRead };

const char* axiom_name(Axiom a);

struct Violation {
  Axiom axiom;
  int rank = -1;
  Tag tag = -1;                // tag involved, when meaningful
  std::string clause;          // short code: "ordering", "skipped", "payload", ...
  std::string detail;          // expected vs actual
  std::size_t state_index = 0; // position in the trace where the check ran
};

std::string violation_to_string(const Violation& v);

/// Axiom checks for a single process in `s` (state_index left at 0).
std::vector<Violation> check_process(const GlobalState& s, int rank,
                                     const TopologySpec& spec);

/// All axiom checks whose premises hold somewhere in `s`.
std::vector<Violation> check_state(const GlobalState& s, const TopologySpec& spec);

/// Structural check of the launch state (process count, rank/size bindings,
/// last_tag -1, zero barriers, empty buffers).
std::vector<Violation> check_initial(const GlobalState& s);

/// Replays the trace and checks every intermediate state (including the
/// initial one, which also gets the AtStart check). Violations carry their
/// state index. Throws ReplayError if the trace is not replayable.
std::vector<Violation> monitor_trace(const Trace& trace, const TopologySpec& spec);

/// Invariants that provably follow from the axioms. They are asserted
/// during exploration of violation-free states; a failure indicates a bug
/// in the semantics or the checker, not in the explored program.
///
/// - no process that still has its final barrier ahead has passed
///   barrier_count(N) or more barriers;
/// - in a state where every process is blocked or terminated, no two
///   processes wait on the same tag.
std::vector<std::string> check_lemmas(const GlobalState& s, const TopologySpec& spec);

}  // namespace mpicheck
