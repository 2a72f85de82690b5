#include "mpicheck/runtime.hpp"

#include <algorithm>
#include <bit>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace mpicheck::rt {

namespace {

constexpr std::int64_t kMaxTagScan = 1 << 20;

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i]))
      return false;
  }
  return true;
}

double fold_step(ReduceOp op, double acc, double x) {
  switch (op) {
    case ReduceOp::Sum: return acc + x;
    case ReduceOp::Min: return std::min(acc, x);
    case ReduceOp::Max: return std::max(acc, x);
    case ReduceOp::LogicalAnd: return (acc != 0.0 && x != 0.0) ? 1.0 : 0.0;
  }
  return acc;
}

}  // namespace

std::vector<SpecError> validate_world_spec(const WorldSpec& spec, int n_lo, int n_hi) {
  TopologySpec shape;
  shape.sender = [&spec](Tag v, int n) { return std::int64_t{spec.sender(v, n)}; };
  shape.receiver = [&spec](Tag v, int n) { return std::int64_t{spec.receiver(v, n)}; };
  shape.message = [](Tag, int) { return std::int64_t{0}; };
  shape.barrier_tag = spec.barrier_tag;
  shape.barrier_count = spec.barrier_count;
  return validate_topology(shape, n_lo, n_hi);
}

World::World(const WorldSpec& spec, int rank, int size, detail_rt::Channel& channel)
    : spec_(spec), rank_(rank), size_(size), channel_(channel) {}

bool World::done() const { return clct_ == spec_.barrier_count(size_); }

void World::fail(Axiom a, const std::string& clause, Tag tag, const std::string& msg) const {
  throw PreconditionViolation(a, clause, rank_, tag,
                              std::string(axiom_name(a)) + "[" + clause + "] at rank " +
                                  std::to_string(rank_) + ": " + msg);
}

void World::check_interval(Tag tag, Axiom axiom_class) const {
  Tag lo = spec_.barrier_tag(clct_, size_);
  Tag hi = spec_.barrier_tag(clct_ + 1, size_);
  if (!(lo <= tag && tag < hi)) {
    fail(axiom_class, "interval", tag,
         "tag " + std::to_string(tag) + " outside the current collective interval [" +
             std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
}

void World::check_no_skipped(Tag up_to) const {
  Tag hi = up_to;
  if (hi - last_tag_ > kMaxTagScan) hi = last_tag_ + kMaxTagScan;
  for (Tag t = last_tag_ + 1; t < hi; ++t) {
    if (spec_.sender(t, size_) == rank_ || spec_.receiver(t, size_) == rank_) {
      fail(Axiom::AtWait, "skipped", t,
           "tag " + std::to_string(t) + " owned by this rank lies in (" +
               std::to_string(last_tag_) + ", " + std::to_string(up_to) + ")");
    }
  }
}

Request World::post(Request::Kind kind, mpicheck::detail::LockedBuffer& buf,
                    const Region& region, Tag tag, bool contiguous) {
  const Axiom ax = kind == Request::Kind::Send ? Axiom::AtSend : Axiom::AtRecv;
  if (tag < 0) fail(ax, "tag", tag, "message tags must be non-negative");
  if (!contiguous) {
    fail(ax, "contiguous", tag, region_to_string(region) + " is not contiguous");
  }
  if (pending_.count(tag)) {
    fail(ax, "duplicate", tag, "tag " + std::to_string(tag) + " already pending");
  }
  check_interval(tag, ax);

  if (kind == Request::Kind::Send) {
    if (spec_.sender(tag, size_) != rank_) {
      fail(ax, "rank", tag,
           "rank " + std::to_string(rank_) + " is not sender(" + std::to_string(tag) +
               ") = " + std::to_string(spec_.sender(tag, size_)));
    }
    std::vector<double> payload = buf.load_region(region);
    std::vector<double> expected = spec_.message(tag, size_);
    if (!bits_equal(payload, expected)) {
      fail(ax, "payload", tag,
           "send buffer does not equal message(" + std::to_string(tag) + ", " +
               std::to_string(size_) + ")");
    }
    buf.acquire_read(region);
    channel_.post_send(rank_, tag, &buf, region, payload.size() * sizeof(double));
  } else {
    if (spec_.receiver(tag, size_) != rank_) {
      fail(ax, "rank", tag,
           "rank " + std::to_string(rank_) + " is not receiver(" + std::to_string(tag) +
               ") = " + std::to_string(spec_.receiver(tag, size_)));
    }
    std::size_t expect_len = spec_.message(tag, size_).size();
    if (buf.region_length(region) != expect_len) {
      fail(ax, "length", tag,
           region_to_string(region) + " has length " +
               std::to_string(buf.region_length(region)) + ", message length is " +
               std::to_string(expect_len));
    }
    buf.acquire_write(region);  // overlap with any pending operation throws here
    channel_.post_recv(rank_, tag);
  }
  pending_.emplace(tag, Pending{kind, &buf, region});
  return Request{kind, tag, false};
}

Request World::isend(LockedArray1D& buf, const Region& region, Tag tag) {
  return post(Request::Kind::Send, buf, region, tag, true);
}
Request World::isend(LockedArray2D& buf, const Region& region, Tag tag) {
  return post(Request::Kind::Send, buf, region, tag, buf.check_contiguous(region));
}
Request World::irecv(LockedArray1D& buf, const Region& region, Tag tag) {
  return post(Request::Kind::Recv, buf, region, tag, true);
}
Request World::irecv(LockedArray2D& buf, const Region& region, Tag tag) {
  return post(Request::Kind::Recv, buf, region, tag, buf.check_contiguous(region));
}

void World::wait(Request& r) {
  auto it = pending_.find(r.tag);
  if (r.completed || it == pending_.end() || it->second.kind != r.kind) {
    fail(Axiom::AtWait, "pending", r.tag,
         "wait on tag " + std::to_string(r.tag) + " without a matching pending request");
  }
  if (r.tag <= last_tag_) {
    fail(Axiom::AtWait, "ordering", r.tag,
         "tag " + std::to_string(r.tag) + " not greater than last completed tag " +
             std::to_string(last_tag_));
  }
  check_no_skipped(r.tag);
  check_interval(r.tag, Axiom::AtWait);

  Pending p = it->second;
  if (r.kind == Request::Kind::Send) {
    channel_.complete_send(rank_, r.tag);
    p.buf->release_read(p.region);
  } else {
    std::vector<double> payload = channel_.complete_recv(rank_, r.tag);
    p.buf->store_region(p.region, payload);
    p.buf->release_write(p.region);
  }
  last_tag_ = r.tag;
  pending_.erase(r.tag);
  r.completed = true;
}

void World::send(LockedArray1D& buf, const Region& region, Tag tag) {
  Request r = isend(buf, region, tag);
  wait(r);
}
void World::send(LockedArray2D& buf, const Region& region, Tag tag) {
  Request r = isend(buf, region, tag);
  wait(r);
}
void World::recv(LockedArray1D& buf, const Region& region, Tag tag) {
  Request r = irecv(buf, region, tag);
  wait(r);
}
void World::recv(LockedArray2D& buf, const Region& region, Tag tag) {
  Request r = irecv(buf, region, tag);
  wait(r);
}

void World::collective_preconditions(std::int64_t index) const {
  if (!pending_.empty()) {
    fail(Axiom::AtBarrier, "pending", pending_.begin()->first,
         std::to_string(pending_.size()) + " request(s) still pending at a collective");
  }
  Tag next = spec_.barrier_tag(index + 1, size_);
  if (next <= last_tag_) {
    fail(Axiom::AtBarrier, "order", next,
         "collective tag " + std::to_string(next) + " not greater than last completed tag " +
             std::to_string(last_tag_));
  }
  check_no_skipped_barrier(next);
}

void World::check_no_skipped_barrier(Tag up_to) const {
  Tag hi = up_to;
  if (hi - last_tag_ > kMaxTagScan) hi = last_tag_ + kMaxTagScan;
  for (Tag t = last_tag_ + 1; t < hi; ++t) {
    if (spec_.sender(t, size_) == rank_ || spec_.receiver(t, size_) == rank_) {
      fail(Axiom::AtBarrier, "skipped", t,
           "tag " + std::to_string(t) + " owned by this rank was never completed before the collective");
    }
  }
}

void World::barrier() {
  collective_preconditions(clct_);
  Collective c = spec_.collective(clct_, size_);
  if (!std::holds_alternative<BarrierSpec>(c)) {
    fail(Axiom::AtBarrier, "kind", -1,
         "collective " + std::to_string(clct_) + " is not a plain barrier");
  }
  channel_.collective(rank_, clct_, {});
  ++clct_;
}

void World::gather_impl(mpicheck::detail::LockedBuffer& sendbuf, const Region& region,
                        mpicheck::detail::LockedBuffer* recvbuf, std::size_t recv_len,
                        int root, bool contiguous) {
  collective_preconditions(clct_);
  Collective c = spec_.collective(clct_, size_);
  const auto* g = std::get_if<GatherSpec>(&c);
  if (!g) {
    fail(Axiom::AtBarrier, "kind", -1,
         "collective " + std::to_string(clct_) + " is not a gather");
  }
  if (root != g->root) {
    fail(Axiom::AtBarrier, "root", -1,
         "gather root " + std::to_string(root) + " does not match the declared root " +
             std::to_string(g->root));
  }
  if (!contiguous) {
    fail(Axiom::AtBarrier, "contiguous", -1, region_to_string(region) + " is not contiguous");
  }
  std::size_t seg_len = static_cast<std::size_t>(g->segment_len(rank_, size_));
  if (sendbuf.region_length(region) != seg_len) {
    fail(Axiom::AtBarrier, "length", -1,
         "segment region length " + std::to_string(sendbuf.region_length(region)) +
             " does not match segment_len = " + std::to_string(seg_len));
  }
  std::vector<double> segment = sendbuf.load_region(region);
  std::vector<double> expected = g->expected_segment(rank_, size_);
  if (!bits_equal(segment, expected)) {
    throw SegmentMismatch(Axiom::AtBarrier, "segment", rank_, -1,
                          "gather segment of rank " + std::to_string(rank_) +
                              " does not equal its expected contents");
  }
  std::size_t total = 0;
  for (int r = 0; r < size_; ++r) total += static_cast<std::size_t>(g->segment_len(r, size_));
  if (rank_ == root) {
    if (!recvbuf) {
      fail(Axiom::AtBarrier, "recvbuf", -1, "root rank passed no receive buffer");
    }
    if (recv_len != total) {
      fail(Axiom::AtBarrier, "recvbuf", -1,
           "receive buffer length " + std::to_string(recv_len) +
               " does not match the total segment length " + std::to_string(total));
    }
  }
  std::vector<double> result = channel_.collective(rank_, clct_, std::move(segment));
  if (rank_ == root) {
    Region full = Range1D{0, recv_len};
    if (auto* r2 = dynamic_cast<LockedArray2D*>(recvbuf)) {
      full = RowBlock{0, r2->rows()};
    }
    if (!recvbuf->writable(full)) {
      fail(Axiom::AtBarrier, "recvbuf", -1, "receive buffer is locked");
    }
    recvbuf->store_region(full, result);
  }
  ++clct_;
}

void World::gather(LockedArray1D& sendbuf, const Region& region, LockedArray1D* recvbuf,
                   int root) {
  gather_impl(sendbuf, region, recvbuf, recvbuf ? recvbuf->size() : 0, root, true);
}

void World::gather(LockedArray2D& sendbuf, const Region& region, LockedArray2D* recvbuf,
                   int root) {
  gather_impl(sendbuf, region, recvbuf, recvbuf ? recvbuf->rows() * recvbuf->cols() : 0, root,
              sendbuf.check_contiguous(region));
}

double World::allreduce(double value, ReduceOp op) {
  collective_preconditions(clct_);
  Collective c = spec_.collective(clct_, size_);
  const auto* a = std::get_if<AllReduceSpec>(&c);
  if (!a) {
    fail(Axiom::AtBarrier, "kind", -1,
         "collective " + std::to_string(clct_) + " is not an allreduce");
  }
  if (a->op != op) {
    fail(Axiom::AtBarrier, "op", -1, "allreduce operation does not match the declared one");
  }
  double expected = a->expected_contribution(rank_, size_);
  if (std::bit_cast<std::uint64_t>(value) != std::bit_cast<std::uint64_t>(expected)) {
    throw ContributionMismatch(Axiom::AtBarrier, "contribution", rank_, -1,
                               "allreduce contribution of rank " + std::to_string(rank_) +
                                   " does not equal its expected value");
  }
  std::vector<double> result = channel_.collective(rank_, clct_, {value});
  ++clct_;
  return result.front();
}

// ---------------------------------------------------------------------------
// Shared executor plumbing.

namespace {

enum class TaskStatus { Running, Parked, Finished, Failed };

struct ParkedOp {
  enum class Kind { None, PostSend, PostRecv, WaitSend, WaitRecv, Collective };
  Kind kind = Kind::None;
  Tag tag = -1;
  std::int64_t index = -1;
  std::vector<double> payload;
  mpicheck::detail::LockedBuffer* buf = nullptr;
  Region region = Range1D{0, 0};
  std::size_t bytes = 0;
};

struct TaskCtx {
  TaskStatus status = TaskStatus::Running;
  ParkedOp op;
  bool granted = false;
  std::vector<double> delivered;
  std::exception_ptr error;
};

struct PostedSend {
  int rank;
  mpicheck::detail::LockedBuffer* buf;
  Region region;
};

std::vector<double> collective_result(const WorldSpec& spec, int n, std::int64_t index,
                                      const std::vector<std::vector<double>>& payloads) {
  Collective c = spec.collective(index, n);
  if (std::holds_alternative<BarrierSpec>(c)) return {};
  if (std::holds_alternative<GatherSpec>(c)) {
    std::vector<double> out;
    for (const auto& p : payloads) out.insert(out.end(), p.begin(), p.end());
    return out;
  }
  const auto& a = std::get<AllReduceSpec>(c);
  double acc = payloads.at(0).at(0);
  for (int r = 1; r < n; ++r) acc = fold_step(a.op, acc, payloads.at(r).at(0));
  return {acc};
}

std::vector<double> collective_share(const WorldSpec& spec, int n, std::int64_t index,
                                     int rank, const std::vector<double>& result) {
  Collective c = spec.collective(index, n);
  if (const auto* g = std::get_if<GatherSpec>(&c)) {
    return rank == g->root ? result : std::vector<double>{};
  }
  return result;
}

void fill_failure(RunResult& result, const std::vector<TaskCtx>& ctx) {
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (ctx[i].status != TaskStatus::Failed || !ctx[i].error) continue;
    try {
      std::rethrow_exception(ctx[i].error);
    } catch (const RunAborted&) {
      continue;  // secondary casualty; keep looking for the root cause
    } catch (const PreconditionViolation& pv) {
      result.status = RunResult::Status::Error;
      result.error = pv.what();
      result.violation =
          RunResult::ViolationInfo{pv.axiom_class(), pv.clause(), pv.rank(), pv.tag()};
      return;
    } catch (const std::exception& e) {
      result.status = RunResult::Status::Error;
      result.error = e.what();
      return;
    }
  }
  result.status = RunResult::Status::Error;
  result.error = "a rank failed without a recorded cause";
}

// -----------------------------------------------------------------------
// Cooperative (sim) channel: tasks park at every call; the scheduler owns
// all shared tables and advances one micro-transition at a time.

class SimChannel : public detail_rt::Channel {
 public:
  explicit SimChannel(int n) : n_(n), ctx_(n) {}

  // Task side.
  void post_send(int rank, Tag tag, mpicheck::detail::LockedBuffer* buf, Region region,
                 std::size_t bytes) override {
    ParkedOp op;
    op.kind = ParkedOp::Kind::PostSend;
    op.tag = tag;
    op.buf = buf;
    op.region = region;
    op.bytes = bytes;
    park(rank, std::move(op));
  }

  void post_recv(int rank, Tag tag) override {
    ParkedOp op;
    op.kind = ParkedOp::Kind::PostRecv;
    op.tag = tag;
    park(rank, std::move(op));
  }

  void complete_send(int rank, Tag tag) override {
    ParkedOp op;
    op.kind = ParkedOp::Kind::WaitSend;
    op.tag = tag;
    park(rank, std::move(op));
  }

  std::vector<double> complete_recv(int rank, Tag tag) override {
    ParkedOp op;
    op.kind = ParkedOp::Kind::WaitRecv;
    op.tag = tag;
    return park(rank, std::move(op));
  }

  std::vector<double> collective(int rank, std::int64_t index,
                                 std::vector<double> payload) override {
    ParkedOp op;
    op.kind = ParkedOp::Kind::Collective;
    op.index = index;
    op.payload = std::move(payload);
    return park(rank, std::move(op));
  }

  void task_finished(int rank) {
    std::lock_guard<std::mutex> lk(mu_);
    ctx_[rank].status = TaskStatus::Finished;
    cv_.notify_all();
  }

  void task_failed(int rank, std::exception_ptr e) {
    std::lock_guard<std::mutex> lk(mu_);
    ctx_[rank].status = TaskStatus::Failed;
    ctx_[rank].error = std::move(e);
    cv_.notify_all();
  }

  // Scheduler side.
  RunResult schedule(const WorldSpec& spec, const SimExecutor::Options& options) {
    RunResult result;
    std::mt19937_64 rng(options.seed);
    std::unique_lock<std::mutex> lk(mu_);
    wait_quiescent(lk);

    for (;;) {
      if (any_failed()) {
        abort_all();
        wait_quiescent(lk);
        fill_failure(result, ctx_);
        return result;
      }
      if (all_finished()) {
        result.status = RunResult::Status::Completed;
        return result;
      }
      auto enabled = enabled_ops();
      if (enabled.empty()) {
        result.status = RunResult::Status::Deadlock;
        result.deadlock_detail = blocked_summary();
        abort_all();
        wait_quiescent(lk);
        return result;
      }
      std::size_t idx;
      if (options.pick) {
        idx = options.pick(enabled.size());
        if (idx >= enabled.size()) idx = enabled.size() - 1;
      } else {
        idx = std::uniform_int_distribution<std::size_t>(0, enabled.size() - 1)(rng);
      }
      result.decisions.push_back(idx);
      result.choice_counts.push_back(enabled.size());
      execute(spec, enabled[idx], lk, options.capture_trace ? &result.trace : nullptr);
      if (++result.steps > options.max_steps) {
        result.status = RunResult::Status::Error;
        result.error = "scheduler step bound exceeded";
        abort_all();
        wait_quiescent(lk);
        return result;
      }
    }
  }

 private:
  std::vector<double> park(int rank, ParkedOp op) {
    std::unique_lock<std::mutex> lk(mu_);
    TaskCtx& c = ctx_[rank];
    c.op = std::move(op);
    c.status = TaskStatus::Parked;
    cv_.notify_all();
    cv_.wait(lk, [&] { return c.granted || aborting_; });
    if (!c.granted) throw RunAborted();
    c.granted = false;
    return std::move(c.delivered);
  }

  void wait_quiescent(std::unique_lock<std::mutex>& lk) {
    cv_.wait(lk, [&] {
      return std::all_of(ctx_.begin(), ctx_.end(),
                         [](const TaskCtx& c) { return c.status != TaskStatus::Running; });
    });
  }

  bool any_failed() const {
    return std::any_of(ctx_.begin(), ctx_.end(),
                       [](const TaskCtx& c) { return c.status == TaskStatus::Failed; });
  }

  bool all_finished() const {
    return std::all_of(ctx_.begin(), ctx_.end(),
                       [](const TaskCtx& c) { return c.status == TaskStatus::Finished; });
  }

  void abort_all() {
    aborting_ = true;
    cv_.notify_all();
  }

  struct MicroOp {
    Rule rule;
    int rank = -1;
    Tag tag = -1;
    std::int64_t index = -1;
  };

  std::vector<MicroOp> enabled_ops() {
    std::vector<MicroOp> out;
    int collective_parked = 0;
    std::int64_t collective_index = -1;
    bool collective_uniform = true;

    for (int i = 0; i < n_; ++i) {
      const TaskCtx& c = ctx_[i];
      if (c.status != TaskStatus::Parked) continue;
      switch (c.op.kind) {
        case ParkedOp::Kind::PostSend:
          out.push_back({Rule::Send, i, c.op.tag, -1});
          break;
        case ParkedOp::Kind::PostRecv:
          out.push_back({Rule::Recv, i, c.op.tag, -1});
          break;
        case ParkedOp::Kind::WaitSend:
          if (payloads_.count(c.op.tag)) out.push_back({Rule::WaitSend, i, c.op.tag, -1});
          break;
        case ParkedOp::Kind::WaitRecv:
          if (payloads_.count(c.op.tag)) out.push_back({Rule::WaitRecv, i, c.op.tag, -1});
          break;
        case ParkedOp::Kind::Collective:
          ++collective_parked;
          if (collective_index == -1) {
            collective_index = c.op.index;
          } else if (collective_index != c.op.index) {
            collective_uniform = false;
          }
          break;
        case ParkedOp::Kind::None:
          break;
      }
    }

    // Payload transfers. A tag whose sender is parked at a non-blocking
    // call (or has terminated) transfers without the wait; otherwise the
    // receiver's wait carries it. Both premises holding yields the same
    // successor, so one entry suffices.
    for (const auto& [tag, posted] : sends_) {
      if (payloads_.count(tag)) continue;
      const TaskCtx& sc = ctx_[posted.rank];
      bool sender_free =
          sc.status == TaskStatus::Finished ||
          (sc.status == TaskStatus::Parked && (sc.op.kind == ParkedOp::Kind::PostSend ||
                                               sc.op.kind == ParkedOp::Kind::PostRecv));
      if (sender_free) {
        out.push_back({Rule::TransferNoWait, posted.rank, tag, -1});
        continue;
      }
      for (int i = 0; i < n_; ++i) {
        const TaskCtx& rc = ctx_[i];
        if (rc.status == TaskStatus::Parked && rc.op.kind == ParkedOp::Kind::WaitRecv &&
            rc.op.tag == tag) {
          out.push_back({Rule::TransferOnWait, i, tag, -1});
          break;
        }
      }
    }

    if (collective_parked == n_ && collective_uniform && n_ > 0) {
      out.push_back({Rule::Barrier, -1, -1, collective_index});
    }

    std::sort(out.begin(), out.end(), [](const MicroOp& a, const MicroOp& b) {
      return std::tuple(static_cast<int>(a.rule), a.rank, a.tag) <
             std::tuple(static_cast<int>(b.rule), b.rank, b.tag);
    });
    return out;
  }

  void record(std::vector<Transition>* trace, Rule rule, int rank, Tag tag) {
    if (trace) trace->push_back(Transition{rule, rank, tag});
  }

  void grant(int rank, std::unique_lock<std::mutex>& lk) {
    TaskCtx& c = ctx_[rank];
    c.granted = true;
    c.status = TaskStatus::Running;
    cv_.notify_all();
    cv_.wait(lk, [&] { return c.status != TaskStatus::Running; });
  }

  void maybe_free(Tag tag, std::vector<Transition>* trace) {
    if (send_done_.count(tag) && recv_done_.count(tag) && payloads_.erase(tag)) {
      record(trace, Rule::FreeBuffer, -1, tag);
    }
  }

  void execute(const WorldSpec& spec, const MicroOp& op, std::unique_lock<std::mutex>& lk,
               std::vector<Transition>* trace) {
    switch (op.rule) {
      case Rule::Send: {
        const ParkedOp& p = ctx_[op.rank].op;
        sends_.emplace(op.tag, PostedSend{op.rank, p.buf, p.region});
        record(trace, Rule::Send, op.rank, op.tag);
        grant(op.rank, lk);
        break;
      }
      case Rule::Recv:
        recvs_.insert(op.tag);
        record(trace, Rule::Recv, op.rank, op.tag);
        grant(op.rank, lk);
        break;
      case Rule::WaitSend:
        sends_.erase(op.tag);
        send_done_.insert(op.tag);
        record(trace, Rule::WaitSend, op.rank, op.tag);
        maybe_free(op.tag, trace);
        grant(op.rank, lk);
        break;
      case Rule::WaitRecv: {
        ctx_[op.rank].delivered = payloads_.at(op.tag);
        recvs_.erase(op.tag);
        recv_done_.insert(op.tag);
        record(trace, Rule::WaitRecv, op.rank, op.tag);
        maybe_free(op.tag, trace);
        grant(op.rank, lk);
        break;
      }
      case Rule::TransferOnWait:
      case Rule::TransferNoWait: {
        const PostedSend& posted = sends_.at(op.tag);
        payloads_[op.tag] = posted.buf->load_region(posted.region);
        record(trace, op.rule, op.rank, op.tag);
        break;
      }
      case Rule::Barrier: {
        std::vector<std::vector<double>> payloads(n_);
        for (int i = 0; i < n_; ++i) payloads[i] = std::move(ctx_[i].op.payload);
        std::vector<double> result = collective_result(spec, n_, op.index, payloads);
        record(trace, Rule::Barrier, -1, -1);
        for (int i = 0; i < n_; ++i) {
          ctx_[i].delivered = collective_share(spec, n_, op.index, i, result);
          grant(i, lk);
        }
        break;
      }
      default:
        throw std::logic_error("unexpected micro-op");
    }
  }

  std::string blocked_summary() const {
    std::string s;
    for (int i = 0; i < n_; ++i) {
      const TaskCtx& c = ctx_[i];
      if (!s.empty()) s += "; ";
      s += "p" + std::to_string(i) + " ";
      if (c.status == TaskStatus::Finished) {
        s += "terminated";
        continue;
      }
      switch (c.op.kind) {
        case ParkedOp::Kind::WaitSend:
          s += "blocked on send of tag " + std::to_string(c.op.tag);
          break;
        case ParkedOp::Kind::WaitRecv:
          s += "blocked on receive of tag " + std::to_string(c.op.tag);
          break;
        case ParkedOp::Kind::Collective:
          s += "blocked at collective " + std::to_string(c.op.index);
          break;
        default:
          s += "parked";
      }
    }
    return s;
  }

  const int n_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<TaskCtx> ctx_;
  bool aborting_ = false;

  std::map<Tag, PostedSend> sends_;
  std::set<Tag> recvs_;
  std::map<Tag, std::vector<double>> payloads_;
  std::set<Tag> send_done_, recv_done_;
};

// -----------------------------------------------------------------------
// Free-running channel: effects happen in the calling rank's thread under
// one lock; waits block on a condition variable.

class ThreadChannel : public detail_rt::Channel {
 public:
  ThreadChannel(const WorldSpec& spec, int n, std::size_t eager_bytes)
      : spec_(spec), n_(n), eager_bytes_(eager_bytes) {}

  void post_send(int rank, Tag tag, mpicheck::detail::LockedBuffer* buf, Region region,
                 std::size_t bytes) override {
    std::lock_guard<std::mutex> lk(mu_);
    sends_.emplace(tag, PostedSend{rank, buf, region});
    if (bytes <= eager_bytes_) {
      payloads_[tag] = buf->load_region(region);
    }
    cv_.notify_all();
  }

  void post_recv(int, Tag tag) override {
    std::lock_guard<std::mutex> lk(mu_);
    recvs_.insert(tag);
    cv_.notify_all();
  }

  void complete_send(int, Tag tag) override {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] { return payloads_.count(tag) > 0 || aborting_; });
    if (aborting_) throw RunAborted();
    sends_.erase(tag);
    send_done_.insert(tag);
    maybe_free(tag);
    cv_.notify_all();
  }

  std::vector<double> complete_recv(int, Tag tag) override {
    std::unique_lock<std::mutex> lk(mu_);
    for (;;) {
      if (aborting_) throw RunAborted();
      auto it = payloads_.find(tag);
      if (it != payloads_.end()) {
        std::vector<double> out = it->second;
        recvs_.erase(tag);
        recv_done_.insert(tag);
        maybe_free(tag);
        cv_.notify_all();
        return out;
      }
      auto ps = sends_.find(tag);
      if (ps != sends_.end()) {
        // Rendezvous: the receiver's wait carries the transfer.
        payloads_[tag] = ps->second.buf->load_region(ps->second.region);
        cv_.notify_all();
        continue;
      }
      cv_.wait(lk);
    }
  }

  std::vector<double> collective(int rank, std::int64_t index,
                                 std::vector<double> payload) override {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] { return coll_readers_ == 0 || aborting_; });
    if (aborting_) throw RunAborted();
    if (coll_arrived_ == 0) {
      coll_index_ = index;
      coll_payloads_.assign(n_, {});
    } else if (coll_index_ != index) {
      abort();
      throw PreconditionViolation(Axiom::AtBarrier, "index", rank, -1,
                                  "ranks disagree on the next collective index");
    }
    coll_payloads_[rank] = std::move(payload);
    if (++coll_arrived_ == n_) {
      coll_result_ = collective_result(spec_, n_, index, coll_payloads_);
      ++coll_generation_;
      coll_arrived_ = 0;
      coll_readers_ = n_;
      cv_.notify_all();
    } else {
      std::uint64_t gen = coll_generation_;
      cv_.wait(lk, [&] { return coll_generation_ != gen || aborting_; });
      if (aborting_) throw RunAborted();
    }
    std::vector<double> share = collective_share(spec_, n_, index, rank, coll_result_);
    if (--coll_readers_ == 0) cv_.notify_all();
    return share;
  }

  void abort() {
    aborting_ = true;
    cv_.notify_all();
  }

  void abort_locked() {
    std::lock_guard<std::mutex> lk(mu_);
    abort();
  }

 private:
  void maybe_free(Tag tag) {
    if (send_done_.count(tag) && recv_done_.count(tag)) payloads_.erase(tag);
  }

  const WorldSpec& spec_;
  const int n_;
  const std::size_t eager_bytes_;

  std::mutex mu_;
  std::condition_variable cv_;
  bool aborting_ = false;

  std::map<Tag, PostedSend> sends_;
  std::set<Tag> recvs_;
  std::map<Tag, std::vector<double>> payloads_;
  std::set<Tag> send_done_, recv_done_;

  std::int64_t coll_index_ = -1;
  int coll_arrived_ = 0;
  int coll_readers_ = 0;
  std::uint64_t coll_generation_ = 0;
  std::vector<std::vector<double>> coll_payloads_;
  std::vector<double> coll_result_;
};

}  // namespace

// ---------------------------------------------------------------------------

SimExecutor::SimExecutor(const WorldSpec& spec, int n) : spec_(spec), n_(n) {}

SimExecutor::SimExecutor(const WorldSpec& spec, int n, Options options)
    : spec_(spec), n_(n), options_(std::move(options)) {}

RunResult SimExecutor::run(const std::function<void(World&)>& body) {
  SimChannel channel(n_);
  std::vector<std::unique_ptr<World>> worlds;
  worlds.reserve(n_);
  for (int i = 0; i < n_; ++i) worlds.push_back(std::make_unique<World>(spec_, i, n_, channel));

  std::vector<std::thread> threads;
  threads.reserve(n_);
  for (int i = 0; i < n_; ++i) {
    threads.emplace_back([&, i] {
      try {
        body(*worlds[i]);
        channel.task_finished(i);
      } catch (...) {
        channel.task_failed(i, std::current_exception());
      }
    });
  }

  RunResult result = channel.schedule(spec_, options_);
  for (auto& t : threads) t.join();
  if (result.status == RunResult::Status::Completed) {
    result.all_done = std::all_of(worlds.begin(), worlds.end(),
                                  [](const auto& w) { return w->done(); });
  }
  return result;
}

ThreadExecutor::ThreadExecutor(const WorldSpec& spec, int n) : spec_(spec), n_(n) {}

ThreadExecutor::ThreadExecutor(const WorldSpec& spec, int n, Options options)
    : spec_(spec), n_(n), options_(options) {}

RunResult ThreadExecutor::run(const std::function<void(World&)>& body) {
  ThreadChannel channel(spec_, n_, options_.eager_bytes);
  std::vector<std::unique_ptr<World>> worlds;
  worlds.reserve(n_);
  for (int i = 0; i < n_; ++i) worlds.push_back(std::make_unique<World>(spec_, i, n_, channel));

  std::vector<TaskCtx> ctx(n_);
  std::vector<std::thread> threads;
  threads.reserve(n_);
  for (int i = 0; i < n_; ++i) {
    threads.emplace_back([&, i] {
      try {
        body(*worlds[i]);
        ctx[i].status = TaskStatus::Finished;
      } catch (...) {
        ctx[i].error = std::current_exception();
        ctx[i].status = TaskStatus::Failed;
        channel.abort_locked();
      }
    });
  }
  for (auto& t : threads) t.join();

  RunResult result;
  if (std::any_of(ctx.begin(), ctx.end(),
                  [](const TaskCtx& c) { return c.status == TaskStatus::Failed; })) {
    fill_failure(result, ctx);
    return result;
  }
  result.status = RunResult::Status::Completed;
  result.all_done =
      std::all_of(worlds.begin(), worlds.end(), [](const auto& w) { return w->done(); });
  return result;
}

EnumerateResult enumerate_schedules(
    const WorldSpec& spec, int n,
    const std::function<std::function<void(World&)>()>& make_body,
    const std::function<void(const RunResult&)>& on_result, std::size_t max_runs) {
  std::vector<std::size_t> prefix;
  EnumerateResult out;
  for (;;) {
    if (out.runs >= max_runs) return out;

    std::size_t step = 0;
    SimExecutor::Options options;
    options.pick = [&prefix, &step](std::size_t count) {
      std::size_t choice = step < prefix.size() ? prefix[step] : 0;
      ++step;
      return std::min(choice, count - 1);
    };
    SimExecutor executor(spec, n, options);
    RunResult res = executor.run(make_body());
    ++out.runs;
    on_result(res);

    const auto& chosen = res.decisions;
    const auto& counts = res.choice_counts;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(chosen.size()) - 1;
    while (i >= 0 && chosen[i] + 1 >= counts[i]) --i;
    if (i < 0) {
      out.complete = true;
      return out;
    }
    prefix.assign(chosen.begin(), chosen.begin() + i);
    prefix.push_back(chosen[i] + 1);
  }
}

}  // namespace mpicheck::rt
