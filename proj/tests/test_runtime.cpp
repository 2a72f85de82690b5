#include <doctest.h>

#include <algorithm>
#include <set>

#include "mpicheck/benchmarks.hpp"
#include "mpicheck/digest.hpp"
#include "mpicheck/runtime.hpp"

using namespace mpicheck;
using namespace mpicheck::rt;

namespace {

// Two ranks; each tag t has sender t%2==0 ? 0 : 1 -> the other rank; message
// payload of tag t is {t+0.5}. One plain barrier then a final gather of one
// element per rank.
WorldSpec pingpong_spec() {
  WorldSpec s;
  s.sender = [](Tag t, int) { return t % 2 == 0 ? 0 : 1; };
  s.receiver = [](Tag t, int) { return t % 2 == 0 ? 1 : 0; };
  s.message = [](Tag t, int) { return std::vector<double>{static_cast<double>(t) + 0.5}; };
  // Tags 0 and 1 precede the first barrier; nothing follows the gather.
  s.barrier_tag = [](std::int64_t id, int) { return std::min<std::int64_t>(id, 1) * 2; };
  s.barrier_count = [](int) { return std::int64_t{2}; };
  s.collective = [](std::int64_t index, int n) -> Collective {
    if (index == 0) return BarrierSpec{};
    GatherSpec g;
    g.root = 0;
    g.segment_len = [](int, int) { return std::int64_t{1}; };
    g.expected_segment = [](int rank, int) {
      return std::vector<double>{rank == 0 ? 0.5 : 1.5};
    };
    (void)n;
    return g;
  };
  return s;
}

// Exchange tags 0 (0->1) and 1 (1->0), barrier, gather.
void pingpong_body(World& w, std::vector<double>* root_out) {
  LockedArray1D buf(1);
  LockedArray1D inbox(1);
  if (w.rank() == 0) {
    buf.set(0, 0.5);
    Request s = w.isend(buf, Range1D{0, 1}, 0);
    Request r = w.irecv(inbox, Range1D{0, 1}, 1);
    w.wait(s);
    w.wait(r);
  } else {
    buf.set(0, 1.5);
    Request r = w.irecv(inbox, Range1D{0, 1}, 0);
    Request s = w.isend(buf, Range1D{0, 1}, 1);
    w.wait(r);
    w.wait(s);
  }
  w.barrier();
  // Rank 0 received 1.5, rank 1 received 0.5; gather own payload back.
  LockedArray1D out(2);
  if (w.rank() == 0) {
    CHECK(inbox.get(0) == 1.5);
    w.gather(buf, Range1D{0, 1}, &out, 0);
    *root_out = out.raw();
  } else {
    CHECK(inbox.get(0) == 0.5);
    w.gather(buf, Range1D{0, 1}, nullptr, 0);
  }
}

}  // namespace

TEST_CASE("sim executor: ping-pong completes, payloads match the contract") {
  WorldSpec spec = pingpong_spec();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::vector<double> root;
    SimExecutor::Options options;
    options.seed = seed;
    options.capture_trace = true;
    SimExecutor ex(spec, 2, options);
    RunResult res = ex.run([&](World& w) { pingpong_body(w, w.rank() == 0 ? &root : nullptr); });
    REQUIRE_MESSAGE(res.status == RunResult::Status::Completed, res.error);
    CHECK(res.all_done);
    CHECK(root == std::vector<double>{0.5, 1.5});
    CHECK_FALSE(res.trace.empty());
  }
}

TEST_CASE("sim executor: same seed, same decisions") {
  WorldSpec spec = pingpong_spec();
  auto run_once = [&](std::uint64_t seed) {
    SimExecutor::Options options;
    options.seed = seed;
    SimExecutor ex(spec, 2, options);
    std::vector<double> root;
    RunResult r = ex.run([&](World& w) { pingpong_body(w, w.rank() == 0 ? &root : nullptr); });
    REQUIRE(r.status == RunResult::Status::Completed);
    return r.decisions;
  };
  CHECK(run_once(42) == run_once(42));
}

TEST_CASE("workers executor: ping-pong under eager and rendezvous thresholds") {
  WorldSpec spec = pingpong_spec();
  for (std::size_t eager_bytes : {std::size_t{0}, std::size_t{4096}}) {
    ThreadExecutor::Options options;
    options.eager_bytes = eager_bytes;  // 0 forces the rendezvous path
    ThreadExecutor ex(spec, 2, options);
    std::vector<double> root;
    RunResult res = ex.run([&](World& w) { pingpong_body(w, w.rank() == 0 ? &root : nullptr); });
    REQUIRE_MESSAGE(res.status == RunResult::Status::Completed, res.error);
    CHECK(res.all_done);
    CHECK(root == std::vector<double>{0.5, 1.5});
  }
}

TEST_CASE("isend preconditions: wrong rank, wrong payload, duplicates") {
  WorldSpec spec = pingpong_spec();
  auto expect_violation = [&](const std::function<void(World&)>& body, Axiom axiom,
                              const std::string& clause) {
    SimExecutor ex(spec, 2);
    RunResult res = ex.run(body);
    REQUIRE(res.status == RunResult::Status::Error);
    REQUIRE(res.violation.has_value());
    CHECK(res.violation->axiom_class == axiom);
    CHECK(res.violation->clause == clause);
  };

  // Rank 1 posts a tag it does not send.
  expect_violation(
      [](World& w) {
        LockedArray1D buf(1);
        if (w.rank() == 1) w.isend(buf, Range1D{0, 1}, 0);
      },
      Axiom::AtSend, "rank");

  // Payload disagrees with message(0) = {0.5}.
  expect_violation(
      [](World& w) {
        LockedArray1D buf(1);
        buf.set(0, 7.0);
        if (w.rank() == 0) w.isend(buf, Range1D{0, 1}, 0);
      },
      Axiom::AtSend, "payload");

  // Duplicate pending tag.
  expect_violation(
      [](World& w) {
        LockedArray1D buf(1);
        buf.set(0, 0.5);
        if (w.rank() == 0) {
          w.isend(buf, Range1D{0, 1}, 0);
          w.isend(buf, Range1D{0, 1}, 0);
        }
      },
      Axiom::AtSend, "duplicate");

  // Receive by the wrong rank.
  expect_violation(
      [](World& w) {
        LockedArray1D buf(1);
        if (w.rank() == 0) w.irecv(buf, Range1D{0, 1}, 0);
      },
      Axiom::AtRecv, "rank");

  // Receive region length must match the payload length.
  expect_violation(
      [](World& w) {
        LockedArray1D buf(4);
        if (w.rank() == 1) w.irecv(buf, Range1D{0, 2}, 0);
      },
      Axiom::AtRecv, "length");
}

TEST_CASE("wait preconditions: ordering, skipped tags, interval") {
  WorldSpec spec = pingpong_spec();
  auto run_expect = [&](const std::function<void(World&)>& body, const std::string& clause) {
    SimExecutor ex(spec, 2);
    RunResult res = ex.run(body);
    REQUIRE(res.status == RunResult::Status::Error);
    REQUIRE(res.violation.has_value());
    CHECK(res.violation->axiom_class == Axiom::AtWait);
    CHECK(res.violation->clause == clause);
  };

  // A fresh request on an already-completed tag passes the posting checks
  // (the tag is no longer pending) and is caught by the wait ordering.
  run_expect(
      [](World& w) {
        LockedArray1D buf(1), inbox(1);
        if (w.rank() == 0) {
          buf.set(0, 0.5);
          w.send(buf, Range1D{0, 1}, 0);
          w.recv(inbox, Range1D{0, 1}, 1);  // last_tag is now 1
          Request again = w.isend(buf, Range1D{0, 1}, 0);
          w.wait(again);  // tag 0 <= last_tag 1
        } else {
          LockedArray1D b2(1);
          b2.set(0, 1.5);
          Request r = w.irecv(inbox, Range1D{0, 1}, 0);
          Request s = w.isend(b2, Range1D{0, 1}, 1);
          w.wait(r);
          w.wait(s);
        }
      },
      "ordering");

  // Waiting on an unposted request.
  run_expect(
      [](World& w) {
        if (w.rank() == 0) {
          Request fake{Request::Kind::Send, 0, false};
          w.wait(fake);
        }
      },
      "pending");
}

TEST_CASE("skipped-tag precondition at wait") {
  // Spec where rank 0 sends both tag 0 and tag 1 to rank 1.
  WorldSpec spec = pingpong_spec();
  spec.sender = [](Tag, int) { return 0; };
  spec.receiver = [](Tag, int) { return 1; };
  SimExecutor ex(spec, 2);
  RunResult res = ex.run([](World& w) {
    if (w.rank() != 0) return;
    LockedArray1D b0(1), b1(1);
    b0.set(0, 0.5);
    b1.set(0, 1.5);
    Request s0 = w.isend(b0, Range1D{0, 1}, 0);
    Request s1 = w.isend(b1, Range1D{0, 1}, 1);
    w.wait(s1);  // skips tag 0, which this rank owns
    w.wait(s0);
  });
  REQUIRE(res.status == RunResult::Status::Error);
  REQUIRE(res.violation.has_value());
  CHECK(res.violation->axiom_class == Axiom::AtWait);
  CHECK(res.violation->clause == "skipped");
}

TEST_CASE("request locks: send buffers stay readable, receive buffers exclusive") {
  WorldSpec spec = pingpong_spec();
  SimExecutor ex(spec, 2);
  RunResult res = ex.run([](World& w) {
    LockedArray1D buf(1), inbox(1);
    if (w.rank() == 0) {
      buf.set(0, 0.5);
      Request s = w.isend(buf, Range1D{0, 1}, 0);
      CHECK(buf.get(0) == 0.5);                       // reads stay legal
      CHECK_THROWS_AS(buf.set(0, 9.0), LockError);    // writes do not
      Request r = w.irecv(inbox, Range1D{0, 1}, 1);
      CHECK_THROWS_AS(inbox.get(0), LockError);       // exclusive while pending
      w.wait(s);
      w.wait(r);
      buf.set(0, 9.0);  // lock released by wait
    } else {
      buf.set(0, 1.5);
      Request r = w.irecv(inbox, Range1D{0, 1}, 0);
      Request s = w.isend(buf, Range1D{0, 1}, 1);
      w.wait(r);
      w.wait(s);
    }
  });
  REQUIRE_MESSAGE(res.status == RunResult::Status::Completed, res.error);
}

TEST_CASE("overlapping receives conflict; double-buffer receives do not") {
  WorldSpec spec = pingpong_spec();
  spec.sender = [](Tag, int) { return 0; };
  spec.receiver = [](Tag, int) { return 1; };
  SimExecutor ex(spec, 2);
  bool conflict_seen = false;
  RunResult res = ex.run([&](World& w) {
    if (w.rank() != 1) return;
    LockedArray1D inbox(2);
    w.irecv(inbox, Range1D{0, 1}, 0);
    try {
      w.irecv(inbox, Range1D{0, 1}, 1);  // overlaps the pending receive
    } catch (const LockError& e) {
      conflict_seen = e.kind() == LockError::Kind::AcquireConflict;
      throw;
    }
  });
  CHECK(res.status == RunResult::Status::Error);
  CHECK(conflict_seen);
}

TEST_CASE("barrier preconditions: pending requests are rejected") {
  WorldSpec spec = pingpong_spec();
  SimExecutor ex(spec, 2);
  RunResult res = ex.run([](World& w) {
    if (w.rank() == 0) {
      LockedArray1D buf(1);
      buf.set(0, 0.5);
      w.isend(buf, Range1D{0, 1}, 0);
      w.barrier();  // un-waited send
    }
  });
  REQUIRE(res.status == RunResult::Status::Error);
  REQUIRE(res.violation.has_value());
  CHECK(res.violation->axiom_class == Axiom::AtBarrier);
  CHECK(res.violation->clause == "pending");
}

TEST_CASE("collective kind, gather segments, allreduce contributions") {
  WorldSpec spec = pingpong_spec();
  // Completes the tag 0/1 exchange so the collective ordering checks pass.
  auto exchange = [](World& w, LockedArray1D& buf) {
    LockedArray1D inbox(1);
    if (w.rank() == 0) {
      buf.set(0, 0.5);
      w.send(buf, Range1D{0, 1}, 0);
      w.recv(inbox, Range1D{0, 1}, 1);
    } else {
      buf.set(0, 1.5);
      w.recv(inbox, Range1D{0, 1}, 0);
      w.send(buf, Range1D{0, 1}, 1);
    }
  };

  // Calling gather where the spec declares a plain barrier.
  {
    SimExecutor ex(spec, 2);
    RunResult res = ex.run([&](World& w) {
      LockedArray1D buf(1);
      exchange(w, buf);
      LockedArray1D out(2);
      w.gather(buf, Range1D{0, 1}, w.rank() == 0 ? &out : nullptr, 0);
    });
    REQUIRE(res.status == RunResult::Status::Error);
    CHECK(res.violation->clause == "kind");
  }

  // Wrong gather segment contents.
  {
    SimExecutor ex(spec, 2);
    RunResult res = ex.run([&](World& w) {
      LockedArray1D buf(1);
      exchange(w, buf);
      w.barrier();
      buf.set(0, 99.0);
      LockedArray1D out(2);
      w.gather(buf, Range1D{0, 1}, w.rank() == 0 ? &out : nullptr, 0);
    });
    REQUIRE(res.status == RunResult::Status::Error);
    CHECK(res.violation->clause == "segment");
    CHECK(res.error.find("expected") != std::string::npos);
  }
}

TEST_CASE("allreduce folds in rank order and checks contributions") {
  WorldSpec spec = pingpong_spec();
  spec.barrier_count = [](int) { return std::int64_t{1}; };
  spec.barrier_tag = [](std::int64_t, int) { return std::int64_t{0}; };  // no messages at all
  spec.collective = [](std::int64_t, int) -> Collective {
    AllReduceSpec a;
    a.op = ReduceOp::Sum;
    a.expected_contribution = [](int rank, int) { return rank == 0 ? 1.0 : 2.0; };
    return a;
  };
  SimExecutor ex(spec, 2);
  RunResult res = ex.run([](World& w) {
    double got = w.allreduce(w.rank() == 0 ? 1.0 : 2.0, ReduceOp::Sum);
    CHECK(got == 3.0);
    CHECK(w.done());
  });
  REQUIRE_MESSAGE(res.status == RunResult::Status::Completed, res.error);
  CHECK(res.all_done);

  // Wrong contribution.
  SimExecutor ex2(spec, 2);
  RunResult res2 = ex2.run([](World& w) {
    w.allreduce(w.rank() == 0 ? 1.0 : 7.0, ReduceOp::Sum);
  });
  REQUIRE(res2.status == RunResult::Status::Error);
  CHECK(res2.violation->clause == "contribution");

  // Wrong operation.
  SimExecutor ex3(spec, 2);
  RunResult res3 = ex3.run([](World& w) {
    w.allreduce(w.rank() == 0 ? 1.0 : 2.0, ReduceOp::Max);
  });
  REQUIRE(res3.status == RunResult::Status::Error);
  CHECK(res3.violation->clause == "op");
}

TEST_CASE("allreduce fold order for min/max/and") {
  auto make_spec = [](ReduceOp op, std::vector<double> contribs) {
    WorldSpec s = pingpong_spec();
    s.barrier_count = [](int) { return std::int64_t{1}; };
    s.barrier_tag = [](std::int64_t, int) { return std::int64_t{0}; };
    s.collective = [op, contribs](std::int64_t, int) -> Collective {
      AllReduceSpec a;
      a.op = op;
      a.expected_contribution = [contribs](int rank, int) { return contribs[rank]; };
      return a;
    };
    return s;
  };
  {
    WorldSpec s = make_spec(ReduceOp::Max, {-1.0, 5.0, 2.0});
    SimExecutor ex(s, 3);
    RunResult res = ex.run([](World& w) {
      double contribs[] = {-1.0, 5.0, 2.0};
      CHECK(w.allreduce(contribs[w.rank()], ReduceOp::Max) == 5.0);
    });
    REQUIRE(res.status == RunResult::Status::Completed);
  }
  {
    WorldSpec s = make_spec(ReduceOp::LogicalAnd, {1.0, 0.0, 3.0});
    SimExecutor ex(s, 3);
    RunResult res = ex.run([](World& w) {
      double contribs[] = {1.0, 0.0, 3.0};
      CHECK(w.allreduce(contribs[w.rank()], ReduceOp::LogicalAnd) == 0.0);
    });
    REQUIRE(res.status == RunResult::Status::Completed);
  }
}

TEST_CASE("sim executor reports deadlocks with a blocked summary") {
  // Rank 1 never posts its send; rank 0 blocks on the receive forever.
  WorldSpec spec = pingpong_spec();
  spec.sender = [](Tag, int) { return 1; };
  spec.receiver = [](Tag, int) { return 0; };
  SimExecutor ex(spec, 2);
  RunResult res = ex.run([](World& w) {
    if (w.rank() == 0) {
      LockedArray1D inbox(1);
      w.recv(inbox, Range1D{0, 1}, 0);
    }
    // rank 1 returns immediately without its barriers; the deadlock hits first
  });
  REQUIRE(res.status == RunResult::Status::Deadlock);
  CHECK(res.deadlock_detail.find("blocked on receive of tag 0") != std::string::npos);
}

TEST_CASE("schedule enumeration covers the ping-pong choice tree exactly once") {
  WorldSpec spec = pingpong_spec();
  std::set<std::vector<std::size_t>> decision_seqs;
  std::set<std::string> digests;
  auto result = enumerate_schedules(
      spec, 2,
      [&]() {
        auto root = std::make_shared<std::vector<double>>();
        return [root](World& w) { pingpong_body(w, w.rank() == 0 ? &(*root) : nullptr); };
      },
      [&](const RunResult& res) {
        REQUIRE(res.status == RunResult::Status::Completed);
        CHECK(decision_seqs.insert(res.decisions).second);
      },
      100000);
  CHECK(result.complete);
  CHECK(result.runs == decision_seqs.size());
  CHECK(result.runs > 10);
}

TEST_CASE("validate_world_spec applies the shape rules") {
  WorldSpec spec = pingpong_spec();
  CHECK_FALSE(has_errors(validate_world_spec(spec, 2, 2)));
  spec.barrier_tag = [](std::int64_t id, int) { return id * 40000; };
  CHECK(has_errors(validate_world_spec(spec, 2, 2)));
}
