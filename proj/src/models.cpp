#include "mpicheck/models.hpp"

#include <algorithm>

namespace mpicheck {

namespace {

ExprPtr rank_var() { return var("rank"); }
ExprPtr size_var() { return var("size"); }
ExprPtr tag_var() { return var("tag"); }

ExprPtr is_rank(std::int64_t r) { return eq(rank_var(), lit(r)); }
ExprPtr is_last_rank() { return eq(rank_var(), sub(size_var(), lit(1))); }

CalculusModel from_exprs(std::string name, CommandPtr program, ExprTopology spec) {
  CalculusModel m;
  m.name = std::move(name);
  m.program = std::move(program);
  m.spec = spec.compile();
  m.expr_spec = std::move(spec);
  return m;
}

// sender = v, receiver = v+1, message = 5 + tag, one trailing barrier.
ExprTopology point_to_point_spec(ExprPtr sender, ExprPtr receiver, ExprPtr message,
                                 ExprPtr barrier_tag, std::int64_t barrier_count,
                                 std::map<std::int64_t, CollectiveSpec> collectives = {}) {
  ExprTopology t;
  t.sender = std::move(sender);
  t.receiver = std::move(receiver);
  t.message = std::move(message);
  t.barrier_tag = std::move(barrier_tag);
  t.barrier_count = lit(barrier_count);
  t.collectives = std::move(collectives);
  return t;
}

}  // namespace

CalculusModel fig5_model() {
  CommandPtr program = cmd_seq({
      cmd_set("x", lit(5)),
      cmd_if(is_rank(0), cmd_isend(lit(0), "x"), cmd_irecv(lit(0), "x")),
      cmd_wait(lit(0)),
  });
  return from_exprs("fig5", std::move(program),
                    point_to_point_spec(lit(0), lit(1), lit(5), var("index"), 1));
}

std::vector<CalculusModel> mutant_models() {
  std::vector<CalculusModel> out;

  {
    // Rank 1 never sends the message rank 0 waits to receive.
    CommandPtr program = cmd_if(
        is_rank(0), cmd_seq(cmd_irecv(lit(0), "x"), cmd_wait(lit(0))), cmd_skip());
    auto m = from_exprs("deadlock_no_send", std::move(program),
                        point_to_point_spec(lit(1), lit(0), lit(5), var("index"), 1));
    m.expect_deadlock = true;
    m.target_axiom = Axiom::AtBarrier;
    out.push_back(std::move(m));
  }
  {
    // Sender waits on its tags in decreasing order.
    CommandPtr program = cmd_seq({
        cmd_set("a", lit(5)),
        cmd_set("b", lit(6)),
        cmd_if(is_rank(0),
               cmd_seq({cmd_isend(lit(0), "a"), cmd_isend(lit(1), "b"),
                        cmd_wait(lit(1)), cmd_wait(lit(0))}),
               cmd_seq({cmd_irecv(lit(0), "x"), cmd_irecv(lit(1), "y"),
                        cmd_wait(lit(0)), cmd_wait(lit(1))})),
    });
    auto m = from_exprs(
        "swapped_wait_order", std::move(program),
        point_to_point_spec(lit(0), lit(1), add(tag_var(), lit(5)),
                            mul(var("index"), lit(2)), 1));
    m.expect_deadlock = true;
    m.target_axiom = Axiom::AtWait;
    out.push_back(std::move(m));
  }
  {
    // Payload disagrees with the declared message function.
    CommandPtr program = cmd_seq({
        cmd_set("x", lit(7)),
        cmd_if(is_rank(0), cmd_isend(lit(0), "x"), cmd_irecv(lit(0), "x")),
        cmd_wait(lit(0)),
    });
    auto m = from_exprs("wrong_payload", std::move(program),
                        point_to_point_spec(lit(0), lit(1), lit(5), var("index"), 1));
    m.target_axiom = Axiom::AtSend;
    out.push_back(std::move(m));
  }
  {
    // Branches swapped: the declared receiver sends and vice versa.
    CommandPtr program = cmd_seq({
        cmd_set("x", lit(5)),
        cmd_if(is_rank(0), cmd_irecv(lit(0), "x"), cmd_isend(lit(0), "x")),
        cmd_wait(lit(0)),
    });
    auto m = from_exprs("send_wrong_rank", std::move(program),
                        point_to_point_spec(lit(0), lit(1), lit(5), var("index"), 1));
    m.target_axiom = Axiom::AtSend;
    out.push_back(std::move(m));
  }
  {
    // Barrier reached while the point-to-point operations are pending.
    CommandPtr program = cmd_seq({
        cmd_set("x", lit(5)),
        cmd_if(is_rank(0), cmd_isend(lit(0), "x"), cmd_irecv(lit(0), "x")),
        cmd_barrier(),
        cmd_wait(lit(0)),
    });
    auto m = from_exprs("barrier_before_wait", std::move(program),
                        point_to_point_spec(lit(0), lit(1), lit(5), var("index"), 2));
    m.target_axiom = Axiom::AtBarrier;
    out.push_back(std::move(m));
  }
  {
    // Only rank 0 executes the in-program barrier.
    CommandPtr program = cmd_if(is_rank(0), cmd_barrier(), cmd_skip());
    auto m = from_exprs("mismatched_barriers", std::move(program),
                        point_to_point_spec(lit(0), lit(1), lit(5), var("index"), 2));
    m.expect_deadlock = true;
    m.target_axiom = Axiom::AtBarrier;
    out.push_back(std::move(m));
  }
  {
    // Sender never waits on its first tag.
    CommandPtr program = cmd_seq({
        cmd_set("a", lit(5)),
        cmd_set("b", lit(6)),
        cmd_if(is_rank(0),
               cmd_seq({cmd_isend(lit(0), "a"), cmd_isend(lit(1), "b"), cmd_wait(lit(1))}),
               cmd_seq({cmd_irecv(lit(0), "x"), cmd_irecv(lit(1), "y"),
                        cmd_wait(lit(0)), cmd_wait(lit(1))})),
    });
    auto m = from_exprs(
        "skipped_wait", std::move(program),
        point_to_point_spec(lit(0), lit(1), add(tag_var(), lit(5)),
                            mul(var("index"), lit(2)), 1));
    m.target_axiom = Axiom::AtWait;
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

// while (counter != bound) { body; barrier; counter += 1 }
CommandPtr counted_loop(const std::string& counter, std::int64_t bound,
                        std::vector<CommandPtr> body) {
  body.push_back(cmd_barrier());
  body.push_back(cmd_set(counter, add(var(counter), lit(1))));
  return cmd_seq(
      cmd_set(counter, lit(0)),
      cmd_while(eq(eq(var(counter), lit(bound)), lit(0)), cmd_seq(std::move(body))));
}

}  // namespace

CalculusModel convection_model(int nt) {
  // Tags of step n are n*(N-1)+r, r in [0, N-2]: sender r, receiver r+1.
  ExprPtr bt = var("bt");
  ExprPtr send_tag = add(bt, rank_var());           // rank < N-1
  ExprPtr recv_tag = add(bt, sub(rank_var(), lit(1)));  // rank > 0

  std::vector<CommandPtr> body = {
      cmd_set("bt", mul(var("n"), sub(size_var(), lit(1)))),
      cmd_if(is_rank(0),
             cmd_seq({cmd_set("s", add(send_tag, lit(1))), cmd_isend(send_tag, "s"),
                      cmd_wait(send_tag)}),
             cmd_if(is_last_rank(),
                    cmd_seq({cmd_irecv(recv_tag, "x"), cmd_wait(recv_tag)}),
                    cmd_seq({cmd_set("s", add(send_tag, lit(1))),
                             cmd_isend(send_tag, "s"), cmd_irecv(recv_tag, "x"),
                             cmd_wait(recv_tag), cmd_wait(send_tag)}))),
  };
  CommandPtr program = counted_loop("n", nt, std::move(body));

  CalculusModel m;
  m.name = "convection";
  m.program = std::move(program);
  m.spec.sender = [](Tag v, int n) { return v % (n - 1); };
  m.spec.receiver = [](Tag v, int n) { return v % (n - 1) + 1; };
  m.spec.message = [](Tag v, int) { return v + 1; };
  // The final collective plateaus: no messages follow it.
  m.spec.barrier_tag = [nt](std::int64_t id, int n) { return std::min<std::int64_t>(id, nt) * (n - 1); };
  m.spec.barrier_count = [nt](int) { return std::int64_t{nt} + 1; };
  m.spec.collectives.emplace(nt, CollectiveSpec{CollectiveSpec::Kind::Gather, 0, ReduceOp::Sum});
  return m;
}

namespace {

// Per step n, tags n*2(N-1)+u: slots u in [0, N-2] go down (u -> u+1),
// slots u in [N-1, 2N-3] go up (u-N+2 -> u-N+1).
CalculusModel stripe_model(std::string name, int steps, CollectiveSpec::Kind per_step_kind) {
  ExprPtr bt = var("bt");
  ExprPtr down_send = add(bt, rank_var());                               // rank < N-1
  ExprPtr down_recv = add(bt, sub(rank_var(), lit(1)));                  // rank > 0
  ExprPtr up_send = add(bt, add(sub(size_var(), lit(2)), rank_var()));   // rank > 0
  ExprPtr up_recv = add(bt, add(sub(size_var(), lit(1)), rank_var()));   // rank < N-1

  auto unless_last = [&](CommandPtr c) { return cmd_if(is_last_rank(), cmd_skip(), c); };
  auto when_inner = [&](CommandPtr c) { return cmd_if(rank_var(), c, cmd_skip()); };

  std::vector<CommandPtr> body = {
      cmd_set("bt", mul(var("n"), mul(lit(2), sub(size_var(), lit(1))))),
      when_inner(cmd_seq({cmd_irecv(down_recv, "hx"), cmd_set("su", add(up_send, lit(1))),
                          cmd_isend(up_send, "su")})),
      unless_last(cmd_seq({cmd_set("sd", add(down_send, lit(1))),
                           cmd_isend(down_send, "sd"), cmd_irecv(up_recv, "hb")})),
      when_inner(cmd_wait(down_recv)),
      unless_last(cmd_wait(down_send)),
      when_inner(cmd_wait(up_send)),
      unless_last(cmd_wait(up_recv)),
  };
  CommandPtr program = counted_loop("n", steps, std::move(body));

  CalculusModel m;
  m.name = std::move(name);
  m.program = std::move(program);
  m.spec.sender = [](Tag v, int n) {
    std::int64_t u = v % (2 * (n - 1));
    return u < n - 1 ? u : u - n + 2;
  };
  m.spec.receiver = [](Tag v, int n) {
    std::int64_t u = v % (2 * (n - 1));
    return u < n - 1 ? u + 1 : u - n + 1;
  };
  m.spec.message = [](Tag v, int) { return v + 1; };
  m.spec.barrier_tag = [steps](std::int64_t id, int n) {
    return std::min<std::int64_t>(id, steps) * 2 * (n - 1);
  };
  m.spec.barrier_count = [steps](int) { return std::int64_t{steps} + 1; };
  for (int i = 0; i < steps; ++i) {
    m.spec.collectives.emplace(i, CollectiveSpec{per_step_kind, 0, ReduceOp::Sum});
  }
  m.spec.collectives.emplace(steps,
                             CollectiveSpec{CollectiveSpec::Kind::Gather, 0, ReduceOp::Sum});
  return m;
}

}  // namespace

CalculusModel poisson_model(int iters) {
  return stripe_model("poisson", iters, CollectiveSpec::Kind::AllReduce);
}

CalculusModel heat_model(int steps) {
  return stripe_model("heat", steps, CollectiveSpec::Kind::Barrier);
}

}  // namespace mpicheck
