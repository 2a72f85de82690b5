#pragma once

#include <functional>
#include <variant>

#include "mpicheck/digest.hpp"
#include "mpicheck/monitor.hpp"
#include "mpicheck/semantics.hpp"

namespace mpicheck {

enum class FreeBufferPolicy {
  Explore,  // FreeBuffer transitions are explored like any other
  Eager,    // applied immediately whenever enabled
  Never,    // never applied
};

struct ExploreBounds {
  std::size_t max_states = 5'000'000;
  std::size_t max_depth = 1'000'000;
  FreeBufferPolicy free_buffer_policy = FreeBufferPolicy::Eager;
  // Chains of local rules on one process are applied atomically as a single
  // explorer step (local rules neither read nor write shared buffers).
  // Disable for rule-level testing.
  bool compress_local = true;
};

struct VerdictOk {
  std::size_t states_visited = 0;
  std::size_t terminal_states = 0;  // distinct terminal states found
};

struct VerdictDeadlock {
  Trace trace;
};

struct VerdictViolation {
  Trace trace;
  std::vector<Violation> violations;
};

struct VerdictBound {
  std::size_t states_visited = 0;
};

using Verdict = std::variant<VerdictOk, VerdictDeadlock, VerdictViolation, VerdictBound>;

bool verdict_is_ok(const Verdict& v);
std::string verdict_summary(const Verdict& v);

/// Optional observation points; all callbacks may be empty.
struct ExploreHooks {
  std::function<void(const GlobalState&, const Digest&)> on_terminal;
  // from-digest, to-digest, label of the step sequence between them
  std::function<void(const Digest&, const Digest&, const std::string&)> on_edge;
  std::function<void(const GlobalState&, const Digest&)> on_state;
};

/// Depth-first search over the reachable states of `program` on `n`
/// processes, deduplicating by canonical_hash. With `monitor` set, every new
/// state is axiom-checked and the search stops at the first violation.
/// Requires validate_topology(spec, n, n) to report no errors.
Verdict explore(const CommandPtr& program, const TopologySpec& spec, int n,
                const ExploreBounds& bounds = {}, bool monitor = false,
                const ExploreHooks* hooks = nullptr);

/// One seeded random maximal schedule: repeatedly applies a uniformly random
/// enabled transition until termination, stuckness, or the depth bound.
/// With `monitor`, violations are recorded and the run continues; any
/// violations make the verdict ViolationFound.
std::pair<Trace, Verdict> run_schedule(const CommandPtr& program, const TopologySpec& spec,
                                       int n, std::uint64_t seed, bool monitor = false,
                                       const ExploreBounds& bounds = {});

}  // namespace mpicheck
