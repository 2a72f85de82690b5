#include <doctest.h>

#include <algorithm>

#include "fig5_fixture.hpp"
#include "mpicheck/monitor.hpp"

using namespace mpicheck;

namespace {

bool has(const std::vector<Violation>& vs, Axiom a, const std::string& clause = "") {
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) {
    return v.axiom == a && (clause.empty() || v.clause == clause);
  });
}

TopologySpec simple_spec() {
  TopologySpec spec;
  spec.sender = [](Tag, int) { return 0; };
  spec.receiver = [](Tag, int) { return 1; };
  spec.message = [](Tag, int) { return 5; };
  spec.barrier_tag = [](std::int64_t id, int) { return id * 10; };
  spec.barrier_count = [](int) { return 2; };
  return spec;
}

ProcState proc(CommandPtr cmd, int rank, std::int64_t last_tag = -1,
               std::int64_t barriers = 0) {
  ProcState p;
  p.cmd = std::move(cmd);
  p.env = Env{{"rank", rank}, {"size", 2}, {"x", 5}};
  p.last_tag = last_tag;
  p.barriers_passed = barriers;
  return p;
}

}  // namespace

TEST_CASE("AtWait: waiting on a tag not above last_tag") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_wait(lit(2)), 0, /*last_tag=*/3), proc(cmd_skip(), 1, -1, 2)};
  s.send_buf[2] = "x";
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtWait, "ordering"));
}

TEST_CASE("AtWait: skipped tag owned by the waiter") {
  auto spec = simple_spec();
  GlobalState s;
  // Rank 0 is the sender of every tag; waiting on 2 with last_tag -1 skips 0, 1.
  s.procs = {proc(cmd_wait(lit(2)), 0), proc(cmd_skip(), 1, -1, 2)};
  s.send_buf[2] = "x";
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtWait, "skipped"));
}

TEST_CASE("AtWait: tag outside the barrier interval") {
  auto spec = simple_spec();
  GlobalState s;
  // One barrier passed: the interval is [10, 20); tag 25 is outside.
  s.procs = {proc(cmd_wait(lit(25)), 0, 12, 1), proc(cmd_skip(), 1, -1, 2)};
  s.send_buf[25] = "x";
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtWait, "interval"));
}

TEST_CASE("AtWait: wait without a pending matching operation") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_wait(lit(0)), 0), proc(cmd_skip(), 1, -1, 2)};
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtWait, "unposted"));
}

TEST_CASE("AtSend: payload must match the message function") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_isend(lit(0), "x"), 0), proc(cmd_skip(), 1, -1, 2)};
  s.procs[0].env["x"] = 7;  // message(0) = 5
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtSend, "payload"));

  s.procs[0].env["x"] = 5;
  CHECK(check_process(s, 0, spec).empty());
}

TEST_CASE("AtSend: wrong rank and duplicate tag") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_skip(), 0, -1, 2), proc(cmd_isend(lit(0), "x"), 1)};
  auto vs = check_process(s, 1, spec);
  CHECK(has(vs, Axiom::AtSend, "rank"));

  GlobalState s2;
  s2.procs = {proc(cmd_isend(lit(0), "x"), 0), proc(cmd_skip(), 1, -1, 2)};
  s2.send_buf[0] = "x";
  CHECK(has(check_process(s2, 0, spec), Axiom::AtSend, "duplicate"));
}

TEST_CASE("AtRecv: wrong rank and duplicate tag") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_irecv(lit(0), "x"), 0), proc(cmd_skip(), 1, -1, 2)};
  CHECK(has(check_process(s, 0, spec), Axiom::AtRecv, "rank"));

  GlobalState s2;
  s2.procs = {proc(cmd_skip(), 0, -1, 2), proc(cmd_irecv(lit(0), "x"), 1)};
  s2.recv_buf[0] = "x";
  CHECK(has(check_process(s2, 1, spec), Axiom::AtRecv, "duplicate"));
}

TEST_CASE("AtBarrier: pending operations and skipped tags") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_barrier(), 0), proc(cmd_barrier(), 1)};
  s.send_buf[0] = "x";
  auto vs0 = check_process(s, 0, spec);
  CHECK(has(vs0, Axiom::AtBarrier, "pending-send"));
  // Tag 0 is in (-1, 10) and rank 0 never completed it.
  CHECK(has(vs0, Axiom::AtBarrier, "skipped"));
  auto vs1 = check_process(s, 1, spec);
  CHECK(has(vs1, Axiom::AtBarrier, "skipped"));  // receiver side
  CHECK_FALSE(has(vs1, Axiom::AtBarrier, "pending-send"));
}

TEST_CASE("AtEnd: terminated process must have passed barrier_count barriers") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_skip(), 0, 5, 1), proc(cmd_skip(), 1, 5, 2)};
  CHECK(has(check_process(s, 0, spec), Axiom::AtEnd, "count"));
  CHECK(check_process(s, 1, spec).empty());
}

TEST_CASE("AtSet: pending buffers and the rank variable are off limits") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_set("x", lit(9)), 0), proc(cmd_skip(), 1, -1, 2)};
  s.send_buf[3] = "x";
  CHECK(has(check_process(s, 0, spec), Axiom::AtSet, "pending-send"));

  GlobalState s2;
  s2.procs = {proc(cmd_set("rank", lit(9)), 0), proc(cmd_skip(), 1, -1, 2)};
  CHECK(has(check_process(s2, 0, spec), Axiom::AtSet, "rank"));

  GlobalState s3;
  s3.procs = {proc(cmd_skip(), 0, -1, 2), proc(cmd_set("y", lit(9)), 1)};
  s3.recv_buf[3] = "y";
  CHECK(has(check_process(s3, 1, spec), Axiom::AtSet, "pending-recv"));
}

TEST_CASE("AtRead: reading a variable a receive is writing") {
  auto spec = simple_spec();
  GlobalState s;
  // Rank 1 has a pending receive into y and is about to evaluate y in a guard.
  s.procs = {proc(cmd_skip(), 0, -1, 2), proc(cmd_if(var("y"), cmd_skip(), cmd_skip()), 1)};
  s.procs[1].env["y"] = 1;
  s.recv_buf[4] = "y";
  CHECK(has(check_process(s, 1, spec), Axiom::AtRead, "pending-recv"));

  // The same pending receive with an unrelated guard is fine.
  GlobalState s2 = s;
  s2.procs[1].cmd = cmd_if(var("x"), cmd_skip(), cmd_skip());
  CHECK(check_process(s2, 1, spec).empty());
}

TEST_CASE("unevaluable head expressions are reported, not thrown") {
  auto spec = simple_spec();
  GlobalState s;
  s.procs = {proc(cmd_wait(divide(lit(1), lit(0))), 0), proc(cmd_skip(), 1, -1, 2)};
  auto vs = check_process(s, 0, spec);
  CHECK(has(vs, Axiom::AtWait, "eval"));
}

TEST_CASE("every boxed state of the two-process example is violation-free") {
  auto f = fig5::make();
  for (std::size_t i = 0; i < f.states.size(); ++i) {
    INFO("state " << i);
    CHECK(check_state(f.states[i], f.model.spec).empty());
  }
}

TEST_CASE("monitor_trace: full top-row schedule is clean") {
  auto f = fig5::make();
  Trace t{initial_state(f.model.program, 2), f.prelude};
  for (const auto& [tr, idx] : f.top_row) t.steps.push_back(tr);
  CHECK(monitor_trace(t, f.model.spec).empty());
}

TEST_CASE("monitor_trace: empty trace of the skip program is clean") {
  auto f = fig5::make();
  Trace t{initial_state(cmd_skip(), 2), {}};
  CHECK(monitor_trace(t, f.model.spec).empty());
}

TEST_CASE("monitor_trace: never-sent mutant flags the skipped tag at the barrier") {
  auto mutants = mutant_models();
  const auto& m = mutants[0];
  REQUIRE(m.name == "deadlock_no_send");
  // p1 takes the skip branch and reaches the final barrier without sending
  // tag 0: Set?, no — the branch is skip, so p1 only steps locally.
  Trace t{initial_state(m.program, 2), {}};
  // Step p1 until it heads the barrier: IfFalse then SeqSkip.
  t.steps.push_back({Rule::IfFalse, 1, -1});
  t.steps.push_back({Rule::SeqSkip, 1, -1});
  auto vs = monitor_trace(t, m.spec);
  REQUIRE_FALSE(vs.empty());
  bool found = false;
  for (const auto& v : vs) {
    if (v.axiom == Axiom::AtBarrier && v.rank == 1 && v.tag == 0 && v.clause == "skipped")
      found = true;
  }
  CHECK(found);
}

TEST_CASE("monitor_trace: violations carry their state index") {
  auto mutants = mutant_models();
  const auto& m = mutants[0];
  Trace t{initial_state(m.program, 2), {{Rule::IfFalse, 1, -1}, {Rule::SeqSkip, 1, -1}}};
  auto vs = monitor_trace(t, m.spec);
  for (const auto& v : vs) {
    if (v.axiom == Axiom::AtBarrier && v.rank == 1) CHECK(v.state_index == 2);
  }
}

TEST_CASE("check_initial accepts launch states and flags corrupted ones") {
  auto f = fig5::make();
  GlobalState s = initial_state(f.model.program, 2);
  CHECK(check_initial(s).empty());

  GlobalState bad = s;
  bad.procs[0].last_tag = 3;
  CHECK_FALSE(check_initial(bad).empty());

  GlobalState bad2 = s;
  bad2.procs[1].env["rank"] = 0;
  CHECK_FALSE(check_initial(bad2).empty());
}

TEST_CASE("lemma checks hold on the example states and fire on corrupted ones") {
  auto f = fig5::make();
  for (const auto& s : f.states) CHECK(check_lemmas(s, f.model.spec).empty());

  // NumberOfBarriers: a process with its final barrier ahead but the full
  // barrier count already passed.
  GlobalState bad = f.states[0];
  bad.procs[0].barriers_passed = 1;  // barrier_count = 1
  auto lemmas = check_lemmas(bad, f.model.spec);
  REQUIRE_FALSE(lemmas.empty());
  CHECK(lemmas.front().find("NumberOfBarriers") != std::string::npos);
}

TEST_CASE("NoTwoTagsTheSame fires only on blocked states with duplicate wait tags") {
  TopologySpec spec = simple_spec();
  GlobalState s;
  // Both processes wait on tag 0 and are blocked (no buffers): p0 is the
  // sender (OnSend), p1 the receiver (OnRecv).
  s.procs = {proc(cmd_wait(lit(0)), 0), proc(cmd_wait(lit(0)), 1)};
  auto lemmas = check_lemmas(s, spec);
  REQUIRE_FALSE(lemmas.empty());
  CHECK(lemmas.front().find("NoTwoTagsTheSame") != std::string::npos);
}
