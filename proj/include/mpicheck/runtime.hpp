#pragma once

#include <functional>
#include <map>
#include <optional>
#include <variant>

#include "mpicheck/locked_array.hpp"
#include "mpicheck/monitor.hpp"
#include "mpicheck/semantics.hpp"
#include "mpicheck/topology.hpp"

namespace mpicheck::rt {

/// Collective descriptors at the runtime level carry the expected data:
/// gather segments and reduce contributions are pure functions of rank and
/// N, checked against what each rank actually supplies.
struct BarrierSpec {};

struct GatherSpec {
  int root = 0;
  std::function<std::int64_t(int, int)> segment_len;                 // (rank, N)
  std::function<std::vector<double>(int, int)> expected_segment;     // (rank, N)
};

struct AllReduceSpec {
  ReduceOp op = ReduceOp::Sum;
  std::function<double(int, int)> expected_contribution;             // (rank, N)
};

using Collective = std::variant<BarrierSpec, GatherSpec, AllReduceSpec>;

/// Runtime topology: like the calculus spec but with array payloads.
struct WorldSpec {
  std::function<int(Tag, int)> sender;
  std::function<int(Tag, int)> receiver;
  std::function<std::vector<double>(Tag, int)> message;
  std::function<Tag(std::int64_t, int)> barrier_tag;
  std::function<std::int64_t(int)> barrier_count;
  std::function<Collective(std::int64_t, int)> collective;  // (index, N)
};

/// Shape checks of validate_topology applied to a runtime spec.
std::vector<SpecError> validate_world_spec(const WorldSpec& spec, int n_lo, int n_hi);

/// A failed API precondition, named after the axiom class it enforces.
class PreconditionViolation : public std::runtime_error {
 public:
  PreconditionViolation(Axiom axiom_class, std::string clause, int rank, Tag tag,
                        const std::string& message)
      : std::runtime_error(message),
        axiom_class_(axiom_class),
        clause_(std::move(clause)),
        rank_(rank),
        tag_(tag) {}

  Axiom axiom_class() const { return axiom_class_; }
  const std::string& clause() const { return clause_; }
  int rank() const { return rank_; }
  Tag tag() const { return tag_; }

 private:
  Axiom axiom_class_;
  std::string clause_;
  int rank_;
  Tag tag_;
};

class SegmentMismatch : public PreconditionViolation {
 public:
  using PreconditionViolation::PreconditionViolation;
};
class ContributionMismatch : public PreconditionViolation {
 public:
  using PreconditionViolation::PreconditionViolation;
};

/// Thrown into blocked tasks when another rank failed and the run aborts.
class RunAborted : public std::runtime_error {
 public:
  RunAborted() : std::runtime_error("run aborted") {}
};

struct Request {
  enum class Kind { Send, Recv };
  Kind kind;
  Tag tag = -1;
  bool completed = false;
};

namespace detail_rt {

/// Transport backend shared by the ranks of one run. Blocking calls return
/// when the operation completes or throw RunAborted.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void post_send(int rank, Tag tag, mpicheck::detail::LockedBuffer* buf,
                         Region region, std::size_t bytes) = 0;
  virtual void post_recv(int rank, Tag tag) = 0;
  virtual void complete_send(int rank, Tag tag) = 0;
  virtual std::vector<double> complete_recv(int rank, Tag tag) = 0;
  virtual std::vector<double> collective(int rank, std::int64_t index,
                                         std::vector<double> payload) = 0;
};

}  // namespace detail_rt

/// Per-rank handle to the runtime: point-to-point and collective operations
/// over locked arrays, with the tag and collective counters that drive the
/// ordering preconditions. Confined to its owning rank's task.
class World {
 public:
  World(const WorldSpec& spec, int rank, int size, detail_rt::Channel& channel);

  int rank() const { return rank_; }
  int size() const { return size_; }
  std::int64_t last_tag() const { return last_tag_; }
  std::int64_t collective_index() const { return clct_; }
  bool done() const;

  Request isend(LockedArray1D& buf, const Region& region, Tag tag);
  Request isend(LockedArray2D& buf, const Region& region, Tag tag);
  Request irecv(LockedArray1D& buf, const Region& region, Tag tag);
  Request irecv(LockedArray2D& buf, const Region& region, Tag tag);

  void wait(Request& r);

  void send(LockedArray1D& buf, const Region& region, Tag tag);
  void send(LockedArray2D& buf, const Region& region, Tag tag);
  void recv(LockedArray1D& buf, const Region& region, Tag tag);
  void recv(LockedArray2D& buf, const Region& region, Tag tag);

  void barrier();

  /// Gather to `root`: recvbuf (root only, others pass nullptr) receives the
  /// concatenation of all ranks' segments in rank order.
  void gather(LockedArray1D& sendbuf, const Region& region, LockedArray1D* recvbuf, int root);
  void gather(LockedArray2D& sendbuf, const Region& region, LockedArray2D* recvbuf, int root);

  double allreduce(double value, ReduceOp op);

 private:
  struct Pending {
    Request::Kind kind;
    mpicheck::detail::LockedBuffer* buf;
    Region region;
  };

  Request post(Request::Kind kind, mpicheck::detail::LockedBuffer& buf, const Region& region,
               Tag tag, bool contiguous);
  void collective_preconditions(std::int64_t index) const;
  void check_interval(Tag tag, Axiom axiom_class) const;
  void check_no_skipped(Tag up_to) const;
  void check_no_skipped_barrier(Tag up_to) const;
  [[noreturn]] void fail(Axiom a, const std::string& clause, Tag tag,
                         const std::string& msg) const;
  void gather_impl(mpicheck::detail::LockedBuffer& sendbuf, const Region& region,
                   mpicheck::detail::LockedBuffer* recvbuf, std::size_t recv_len, int root,
                   bool contiguous);

  const WorldSpec& spec_;
  int rank_, size_;
  detail_rt::Channel& channel_;
  std::int64_t last_tag_ = -1;
  std::int64_t clct_ = 0;
  std::map<Tag, Pending> pending_;
};

struct RunResult {
  enum class Status { Completed, Deadlock, Error };
  Status status = Status::Completed;

  std::string error;  // message when Status::Error
  struct ViolationInfo {
    Axiom axiom_class;
    std::string clause;
    int rank;
    Tag tag;
  };
  std::optional<ViolationInfo> violation;

  bool all_done = false;  // every rank reached its barrier count
  std::vector<Transition> trace;        // when trace capture is on
  std::vector<std::size_t> decisions;   // chosen index at each scheduler choice
  std::vector<std::size_t> choice_counts;  // enabled-set size at each choice
  std::size_t steps = 0;
  std::string deadlock_detail;
};

/// Cooperative single-stepping executor: ranks run as tasks that yield at
/// every runtime call; a seeded scheduler picks among the enabled
/// micro-transitions, which mirror the calculus rules one-to-one. Payload
/// buffers are reclaimed eagerly once both endpoints completed.
class SimExecutor {
 public:
  struct Options {
    std::uint64_t seed = 0;
    // Overrides the seeded choice when set: given the enabled count, return
    // the index to take. Used for schedule enumeration.
    std::function<std::size_t(std::size_t)> pick;
    bool capture_trace = false;
    std::size_t max_steps = 50'000'000;
  };

  SimExecutor(const WorldSpec& spec, int n);
  SimExecutor(const WorldSpec& spec, int n, Options options);

  RunResult run(const std::function<void(World&)>& body);

 private:
  const WorldSpec& spec_;
  int n_;
  Options options_;
};

/// Free-running executor: each rank is an independent worker thread and the
/// runtime mediates all data exchange through internal channels. Sends with
/// payloads at most `eager_bytes` buffer immediately; larger ones take the
/// rendezvous path and complete only when the receiver waits.
class ThreadExecutor {
 public:
  struct Options {
    std::size_t eager_bytes = 4096;
  };

  ThreadExecutor(const WorldSpec& spec, int n);
  ThreadExecutor(const WorldSpec& spec, int n, Options options);

  RunResult run(const std::function<void(World&)>& body);

 private:
  const WorldSpec& spec_;
  int n_;
  Options options_;
};

struct EnumerateResult {
  std::size_t runs = 0;
  bool complete = false;  // every schedule was enumerated within max_runs
};

/// Exhaustive stateless exploration of sim-mode schedules: re-runs the body
/// under every decision sequence (depth-first over the choice tree).
EnumerateResult enumerate_schedules(
    const WorldSpec& spec, int n,
    const std::function<std::function<void(World&)>()>& make_body,
    const std::function<void(const RunResult&)>& on_result, std::size_t max_runs);

}  // namespace mpicheck::rt
