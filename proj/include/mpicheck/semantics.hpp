#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpicheck/state.hpp"
#include "mpicheck/topology.hpp"

namespace mpicheck {

/// Reduction rules. Enum order is the canonical ordering of enabled
/// transition lists (then by rank, then by tag), which makes seeded random
/// schedules reproducible.
enum class Rule {
  IfTrue,
  IfFalse,
  While,
  Set,
  SeqSkip,
  Send,
  Recv,
  WaitRecv,
  WaitSend,
  TransferOnWait,
  TransferNoWait,
  FreeBuffer,
  Barrier,
};

const char* rule_name(Rule r);
std::optional<Rule> rule_from_name(const std::string& name);

/// One labeled reduction step. Given a state, a Transition uniquely
/// determines the successor. rank is -1 for Barrier and FreeBuffer (they
/// affect all ranks or none); tag is -1 for non-communication rules.
struct Transition {
  Rule rule;
  int rank = -1;
  Tag tag = -1;

  bool operator==(const Transition&) const = default;
};

std::string transition_to_string(const Transition& t);

/// A replayable schedule: each step must be enabled in its predecessor.
struct Trace {
  GlobalState initial;
  std::vector<Transition> steps;
};

class TransitionNotEnabled : public std::runtime_error {
 public:
  explicit TransitionNotEnabled(const std::string& what) : std::runtime_error(what) {}
};

class ReplayError : public std::runtime_error {
 public:
  explicit ReplayError(const std::string& what) : std::runtime_error(what) {}
};

struct LocalStep {
  ProcState next;
  Rule rule;
};

/// Applies the unique applicable local rule (IfTrue/IfFalse/While/Set/
/// SeqSkip, descending into Seq heads). Returns nullopt when the head is a
/// communication primitive, a barrier, or the process is a lone skip.
std::optional<LocalStep> local_step(const ProcState& p);

/// All transitions whose premises hold in `s`, in canonical order.
/// TransferNoWait/TransferOnWait are suppressed for tags already present in
/// the message buffer (re-copying is a self-loop: the source cannot change
/// while the send is pending).
std::vector<Transition> enabled_transitions(const GlobalState& s, const TopologySpec& spec);

/// True iff `tr`'s premises hold in `s`.
bool transition_enabled(const GlobalState& s, const Transition& tr, const TopologySpec& spec);

/// Successor of `s` under `tr`. Throws TransitionNotEnabled if the premises
/// do not hold.
GlobalState apply_transition(const GlobalState& s, const Transition& tr,
                             const TopologySpec& spec);

/// Blocked-process classification. A process is classified by at most one
/// of these; Unclassified can only arise for axiom-violating programs.
enum class ProcClass { OnSend, OnRecv, OnBarrier, Terminated, Running, Unclassified };

ProcClass classify_proc(const GlobalState& s, int rank, const TopologySpec& spec);

/// Deadlock: every process is blocked on a send, a receive or a barrier, or
/// terminated; not all terminated; not all at a barrier.
bool is_deadlock(const GlobalState& s, const TopologySpec& spec);

/// True iff no transition other than FreeBuffer is enabled and not every
/// process has terminated. Coincides with is_deadlock on axiom-respecting
/// states; on mutants it may classify more stuck states as dead.
bool is_stuck(const GlobalState& s, const TopologySpec& spec);

/// True iff every process is a lone skip.
bool is_terminated(const GlobalState& s);

/// Replays a trace from its initial state, invoking `on_state` (if given)
/// on every state including the initial one. Throws ReplayError when a step
/// is not enabled.
GlobalState replay_trace(const Trace& trace, const TopologySpec& spec,
                         const std::function<void(const GlobalState&, std::size_t)>& on_state = {});

}  // namespace mpicheck
