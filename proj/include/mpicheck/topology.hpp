#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mpicheck/expr.hpp"

namespace mpicheck {

using Tag = std::int64_t;

/// Largest allowed tag gap between consecutive barriers. Real MPI tags may
/// be as small as 15 bits, so keeping at most this many tags per barrier
/// interval keeps tags unique between barriers even under overflow.
inline constexpr std::int64_t kMaxBarrierTagGap = 32767;

enum class ReduceOp { Sum, Min, Max, LogicalAnd };

/// Calculus-level collective descriptor. At this level collectives reduce to
/// barriers; the kind and parameters decorate the barrier for reporting and
/// for the runtime layer, which holds its own payload-bearing descriptors.
struct CollectiveSpec {
  enum class Kind { Barrier, Gather, AllReduce };
  Kind kind = Kind::Barrier;
  int root = 0;               // Gather
  ReduceOp op = ReduceOp::Sum;  // AllReduce
};

/// The user-provided communication topology: five pure functions of
/// process-independent quantities, plus collective decorations by barrier
/// index.
struct TopologySpec {
  std::function<std::int64_t(Tag, int)> sender;
  std::function<std::int64_t(Tag, int)> receiver;
  std::function<std::int64_t(Tag, int)> message;
  // barrier_tag(b, N): lower tag bound for messages issued after passing b
  // barriers; defined for b in [0, barrier_count(N)]. Strictly increasing,
  // except that the value at barrier_count(N) may repeat the previous one:
  // no messages can follow the final barrier, so its interval is empty.
  std::function<Tag(std::int64_t, int)> barrier_tag;
  std::function<std::int64_t(int)> barrier_count;
  std::map<std::int64_t, CollectiveSpec> collectives;
};

struct SpecError {
  enum class Code {
    BarrierBaseNonZero,
    BarrierNotMonotone,
    TagGapExceeded,
    RankOutOfRange,
    NegativeBarrierCount,
    EvalFailure,
    SelfSend,  // warning: sender(v) == receiver(v)
  };

  Code code;
  int n = 0;          // process count the check ran at
  std::int64_t tag = -1;
  std::int64_t barrier_index = -1;
  bool warning = false;
  std::string detail;
};

std::string spec_error_to_string(const SpecError& e);

/// Checks, for every N in [n_lo, n_hi]: barrier_tag(0, N) = 0, strict
/// monotonicity of barrier_tag over [0, barrier_count(N)], the tag gap rule,
/// and sender/receiver ranks in [0, N) for every tag below
/// barrier_tag(barrier_count(N), N). Self-sends are reported as warnings.
std::vector<SpecError> validate_topology(const TopologySpec& spec, int n_lo, int n_hi);

/// True iff the list contains a non-warning entry.
bool has_errors(const std::vector<SpecError>& errors);

/// Builds a TopologySpec whose five functions evaluate expressions of the
/// calculus. sender/receiver/message range over {tag, size}; barrier_tag
/// over {index, size}; barrier_count over {size}.
TopologySpec make_expr_topology(ExprPtr sender, ExprPtr receiver, ExprPtr message,
                                ExprPtr barrier_tag, ExprPtr barrier_count,
                                std::map<std::int64_t, CollectiveSpec> collectives);

}  // namespace mpicheck
