#include <doctest.h>

#include <random>

#include "fig5_fixture.hpp"
#include "mpicheck/digest.hpp"

using namespace mpicheck;

namespace {

GlobalState reach_state0(const fig5::Fixture& f) {
  GlobalState s = initial_state(f.model.program, 2);
  for (const Transition& tr : f.prelude) s = apply_transition(s, tr, f.model.spec);
  return s;
}

}  // namespace

TEST_CASE("local_step: SeqSkip removes a leading skip") {
  ProcState p;
  p.cmd = cmd_seq(cmd_skip(), cmd_wait(lit(0)));
  p.env = {{"rank", 0}, {"size", 2}};
  auto step = local_step(p);
  REQUIRE(step);
  CHECK(step->rule == Rule::SeqSkip);
  CHECK(step->next.cmd->kind == Command::Kind::Wait);
  CHECK(step->next.env == p.env);
  CHECK(step->next.last_tag == p.last_tag);
}

TEST_CASE("local_step: Set updates the environment and leaves a skip") {
  ProcState p;
  p.cmd = cmd_set("x", lit(5));
  p.env = {{"rank", 0}, {"size", 2}};
  auto step = local_step(p);
  REQUIRE(step);
  CHECK(step->rule == Rule::Set);
  CHECK(step->next.cmd->kind == Command::Kind::Skip);
  CHECK(step->next.env.at("x") == 5);
}

TEST_CASE("local_step: while with a false guard unrolls to skip") {
  ProcState p;
  p.cmd = cmd_while(lit(0), cmd_set("y", lit(1)));
  p.env = {{"rank", 0}, {"size", 2}};
  auto step = local_step(p);
  REQUIRE(step);
  CHECK(step->rule == Rule::While);
  CHECK(step->next.cmd->kind == Command::Kind::If);
  auto step2 = local_step(step->next);
  REQUIRE(step2);
  CHECK(step2->rule == Rule::IfFalse);
  CHECK(step2->next.cmd->kind == Command::Kind::Skip);
}

TEST_CASE("local_step: none for communication heads and lone skip") {
  ProcState p;
  p.env = {{"rank", 0}, {"size", 2}};
  p.cmd = cmd_wait(lit(0));
  CHECK_FALSE(local_step(p));
  p.cmd = cmd_barrier();
  CHECK_FALSE(local_step(p));
  p.cmd = cmd_skip();
  CHECK_FALSE(local_step(p));
}

TEST_CASE("enabled at state 0: exactly the send and the receive") {
  auto f = fig5::make();
  GlobalState s0 = reach_state0(f);
  REQUIRE(state_equal(s0, f.states[0]));
  auto enabled = enabled_transitions(s0, f.model.spec);
  REQUIRE(enabled.size() == 2);
  CHECK(enabled[0] == Transition{Rule::Send, 0, 0});
  CHECK(enabled[1] == Transition{Rule::Recv, 1, 0});
}

TEST_CASE("enabled at state 1: local step, receive, and the eager transfer") {
  auto f = fig5::make();
  auto enabled = enabled_transitions(f.states[1], f.model.spec);
  REQUIRE(enabled.size() == 3);
  CHECK(enabled[0] == Transition{Rule::SeqSkip, 0, -1});
  CHECK(enabled[1] == Transition{Rule::Recv, 1, 0});
  CHECK(enabled[2] == Transition{Rule::TransferNoWait, 0, 0});
}

TEST_CASE("no transition applies to an all-terminated state") {
  auto f = fig5::make();
  GlobalState s;
  ProcState p;
  p.cmd = cmd_skip();
  p.env = {{"rank", 0}, {"size", 2}};
  s.procs = {p, p};
  s.procs[1].env["rank"] = 1;
  CHECK(enabled_transitions(s, f.model.spec).empty());
  CHECK(is_terminated(s));
  CHECK_FALSE(is_deadlock(s, f.model.spec));
}

TEST_CASE("both schedule rows replay through the expected states") {
  auto f = fig5::make();
  for (const auto* row : {&f.top_row, &f.bottom_row}) {
    GlobalState s = f.states[0];
    for (const auto& [tr, expect] : *row) {
      REQUIRE(transition_enabled(s, tr, f.model.spec));
      s = apply_transition(s, tr, f.model.spec);
      if (expect >= 0) {
        INFO("after " << transition_to_string(tr) << ", expected state " << expect);
        CHECK(state_equal(s, f.states[static_cast<std::size_t>(expect)]));
      }
    }
    // Both rows converge on state 5; the receiver holds the payload.
    CHECK(s.procs[1].env.at("x") == 5);
  }
}

TEST_CASE("transfer re-application is suppressed as a self-loop") {
  auto f = fig5::make();
  // State 2 has the payload buffered already; no TransferNoWait is offered.
  for (const Transition& tr : enabled_transitions(f.states[2], f.model.spec)) {
    CHECK(tr.rule != Rule::TransferNoWait);
  }
  CHECK_FALSE(transition_enabled(f.states[2], {Rule::TransferNoWait, 0, 0}, f.model.spec));
}

TEST_CASE("apply_transition rejects disabled transitions") {
  auto f = fig5::make();
  CHECK_THROWS_AS(apply_transition(f.states[0], Transition{Rule::WaitSend, 0, 0}, f.model.spec),
                  TransitionNotEnabled);
  CHECK_THROWS_AS(apply_transition(f.states[0], Transition{Rule::Barrier, -1, -1}, f.model.spec),
                  TransitionNotEnabled);
}

TEST_CASE("determinism: one transition, one successor") {
  auto f = fig5::make();
  for (std::size_t i = 0; i < f.states.size(); ++i) {
    for (const Transition& tr : enabled_transitions(f.states[i], f.model.spec)) {
      GlobalState a = apply_transition(f.states[i], tr, f.model.spec);
      GlobalState b = apply_transition(f.states[i], tr, f.model.spec);
      CHECK(state_equal(a, b));
      CHECK(canonical_hash(a) == canonical_hash(b));
    }
  }
}

TEST_CASE("frame property: local rules touch only the subject process") {
  auto f = fig5::make();
  GlobalState s = initial_state(f.model.program, 2);
  // Walk a few random schedules and check the frame property on every local step.
  std::mt19937_64 rng(7);
  for (int walk = 0; walk < 20; ++walk) {
    GlobalState cur = s;
    for (int step = 0; step < 30; ++step) {
      auto enabled = enabled_transitions(cur, f.model.spec);
      if (enabled.empty()) break;
      const Transition tr = enabled[rng() % enabled.size()];
      GlobalState next = apply_transition(cur, tr, f.model.spec);
      bool local = tr.rule == Rule::IfTrue || tr.rule == Rule::IfFalse ||
                   tr.rule == Rule::While || tr.rule == Rule::Set || tr.rule == Rule::SeqSkip;
      if (local) {
        CHECK(next.recv_buf == cur.recv_buf);
        CHECK(next.send_buf == cur.send_buf);
        CHECK(next.msg_buf == cur.msg_buf);
        for (std::size_t i = 0; i < cur.procs.size(); ++i) {
          if (static_cast<int>(i) != tr.rank) CHECK(proc_equal(cur.procs[i], next.procs[i]));
        }
      }
      // Buffer monotonicity: send/recv buffers shrink only via the waits,
      // the payload buffer only via FreeBuffer.
      auto keys = [](const auto& m) {
        std::vector<std::int64_t> k;
        for (const auto& [key, value] : m) k.push_back(key);
        return k;
      };
      if (tr.rule != Rule::WaitSend) {
        for (auto k : keys(cur.send_buf)) CHECK(next.send_buf.count(k));
      }
      if (tr.rule != Rule::WaitRecv) {
        for (auto k : keys(cur.recv_buf)) CHECK(next.recv_buf.count(k));
      }
      if (tr.rule != Rule::FreeBuffer) {
        for (auto k : keys(cur.msg_buf)) CHECK(next.msg_buf.count(k));
      }
      cur = next;
    }
  }
}

TEST_CASE("Table 2: blocked receive plus blocked barrier is a deadlock") {
  TopologySpec spec;
  spec.sender = [](Tag, int) { return 1; };
  spec.receiver = [](Tag, int) { return 0; };
  spec.message = [](Tag, int) { return 5; };
  spec.barrier_tag = [](std::int64_t id, int) { return id; };
  spec.barrier_count = [](int) { return 1; };

  GlobalState s;
  ProcState p0, p1;
  p0.cmd = cmd_wait(lit(0));
  p0.env = {{"rank", 0}, {"size", 2}};
  p1.cmd = cmd_barrier();
  p1.env = {{"rank", 1}, {"size", 2}};
  s.procs = {p0, p1};
  s.recv_buf[0] = "x";  // receive posted, sender absent

  CHECK(classify_proc(s, 0, spec) == ProcClass::OnRecv);
  CHECK(classify_proc(s, 1, spec) == ProcClass::OnBarrier);
  CHECK(is_deadlock(s, spec));
  CHECK(is_stuck(s, spec));
}

TEST_CASE("Table 2: all processes at a barrier is not a deadlock") {
  auto f = fig5::make();
  GlobalState s;
  ProcState p;
  p.cmd = cmd_barrier();
  p.env = {{"rank", 0}, {"size", 2}};
  s.procs = {p, p};
  s.procs[1].env["rank"] = 1;
  CHECK_FALSE(is_deadlock(s, f.model.spec));
  auto enabled = enabled_transitions(s, f.model.spec);
  REQUIRE(enabled.size() == 1);
  CHECK(enabled[0].rule == Rule::Barrier);
}

TEST_CASE("barrier transition synchronizes every process") {
  auto f = fig5::make();
  GlobalState s;
  ProcState p;
  p.cmd = cmd_seq(cmd_barrier(), cmd_skip());
  p.env = {{"rank", 0}, {"size", 2}};
  s.procs = {p, p};
  s.procs[1].env["rank"] = 1;
  GlobalState next = apply_transition(s, {Rule::Barrier, -1, -1}, f.model.spec);
  for (const auto& q : next.procs) {
    CHECK(q.barriers_passed == 1);
    CHECK(head_command(*q.cmd).kind == Command::Kind::Skip);
  }
}

TEST_CASE("trace replay validates each step") {
  auto f = fig5::make();
  Trace good{initial_state(f.model.program, 2), f.prelude};
  GlobalState end = replay_trace(good, f.model.spec);
  CHECK(state_equal(end, f.states[0]));

  Trace bad{initial_state(f.model.program, 2), {Transition{Rule::WaitRecv, 0, 0}}};
  CHECK_THROWS_AS(replay_trace(bad, f.model.spec), ReplayError);
}

TEST_CASE("canonical_hash: equality and sensitivity") {
  auto f = fig5::make();
  GlobalState s = f.states[4];
  GlobalState copy = s;
  CHECK(canonical_hash(s) == canonical_hash(copy));

  GlobalState tweaked = s;
  tweaked.procs[0].env["x"] = 6;
  CHECK_FALSE(canonical_hash(s) == canonical_hash(tweaked));

  GlobalState tweaked2 = s;
  tweaked2.msg_buf[0] = 6;
  CHECK_FALSE(canonical_hash(s) == canonical_hash(tweaked2));
}

TEST_CASE("fig5: the two rows reach state 5 with equal digests") {
  auto f = fig5::make();
  GlobalState top = f.states[0], bottom = f.states[0];
  for (const auto& [tr, expect] : f.top_row) top = apply_transition(top, tr, f.model.spec);
  for (const auto& [tr, expect] : f.bottom_row)
    bottom = apply_transition(bottom, tr, f.model.spec);
  CHECK(state_equal(top, bottom));
  CHECK(canonical_hash(top) == canonical_hash(bottom));
}
