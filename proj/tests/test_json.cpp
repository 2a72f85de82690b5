#include <doctest.h>

#include <random>

#include "mpicheck/json_io.hpp"
#include "mpicheck/models.hpp"

using namespace mpicheck;

namespace {

ExprPtr random_expr(std::mt19937_64& rng, int depth) {
  if (depth == 0 || rng() % 3 == 0) {
    if (rng() % 2) return lit(static_cast<std::int64_t>(rng() % 1000) - 500);
    const char* names[] = {"rank", "size", "tag", "x", "n"};
    return var(names[rng() % 5]);
  }
  switch (rng() % 5) {
    case 0: return add(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 1: return mul(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 2: return eq(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 3: return divide(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    default: return neg(random_expr(rng, depth - 1));
  }
}

CommandPtr random_command(std::mt19937_64& rng, int depth) {
  if (depth == 0 || rng() % 4 == 0) {
    switch (rng() % 5) {
      case 0: return cmd_skip();
      case 1: return cmd_barrier();
      case 2: return cmd_set("v" + std::to_string(rng() % 4), random_expr(rng, 2));
      case 3: return cmd_isend(random_expr(rng, 2), "s");
      default: return cmd_wait(random_expr(rng, 2));
    }
  }
  switch (rng() % 4) {
    case 0:
      return cmd_if(random_expr(rng, 2), random_command(rng, depth - 1),
                    random_command(rng, depth - 1));
    case 1: return cmd_while(random_expr(rng, 2), random_command(rng, depth - 1));
    case 2: return cmd_irecv(random_expr(rng, 2), "r");
    default:
      return cmd_seq(random_command(rng, depth - 1), random_command(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("expression round-trip preserves structure") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    ExprPtr e = random_expr(rng, 4);
    ExprPtr back = expr_from_json(expr_to_json(*e));
    CHECK(expr_equal(e, back));
  }
}

TEST_CASE("command round-trip preserves structure") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    CommandPtr c = random_command(rng, 4);
    CommandPtr back = command_from_json(command_to_json(*c));
    CHECK(command_equal(c, back));
  }
}

TEST_CASE("expression shorthand: numbers and strings") {
  CHECK(expr_equal(expr_from_json(json(5)), lit(5)));
  CHECK(expr_equal(expr_from_json(json("rank")), var("rank")));
  CHECK(expr_equal(expr_from_json(json::parse(R"({"op":"sub","lhs":"size","rhs":1})")),
                   sub(var("size"), lit(1))));
}

TEST_CASE("spec round-trip compiles to the same functions") {
  auto f = fig5_model();
  REQUIRE(f.expr_spec.has_value());
  json j = spec_to_json(*f.expr_spec);
  ExprTopology back = spec_from_json(j);
  TopologySpec a = f.expr_spec->compile();
  TopologySpec b = back.compile();
  for (Tag t = 0; t < 4; ++t) {
    for (int n = 2; n <= 4; ++n) {
      CHECK(a.sender(t, n) == b.sender(t, n));
      CHECK(a.receiver(t, n) == b.receiver(t, n));
      CHECK(a.message(t, n) == b.message(t, n));
      CHECK(a.barrier_tag(t, n) == b.barrier_tag(t, n));
    }
  }
  CHECK(a.barrier_count(2) == b.barrier_count(2));
}

TEST_CASE("collectives round-trip") {
  ExprTopology t;
  t.sender = lit(0);
  t.receiver = lit(1);
  t.message = lit(5);
  t.barrier_tag = var("index");
  t.barrier_count = lit(3);
  t.collectives[1] = CollectiveSpec{CollectiveSpec::Kind::Gather, 0, ReduceOp::Sum};
  t.collectives[2] = CollectiveSpec{CollectiveSpec::Kind::AllReduce, 0, ReduceOp::Max};
  ExprTopology back = spec_from_json(spec_to_json(t));
  REQUIRE(back.collectives.size() == 2);
  CHECK(back.collectives.at(1).kind == CollectiveSpec::Kind::Gather);
  CHECK(back.collectives.at(2).kind == CollectiveSpec::Kind::AllReduce);
  CHECK(back.collectives.at(2).op == ReduceOp::Max);
}

TEST_CASE("trace file round-trip") {
  auto f = fig5_model();
  TraceFile tf;
  tf.n = 2;
  tf.program = f.program;
  tf.steps = {{Rule::Set, 0, -1}, {Rule::Send, 0, 0}, {Rule::Barrier, -1, -1}};
  TraceFile back = trace_from_json(trace_to_json(tf));
  CHECK(back.n == 2);
  CHECK(command_equal(back.program, tf.program));
  REQUIRE(back.steps.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.steps[i] == tf.steps[i]);
}

TEST_CASE("verdict serialization covers all variants") {
  CHECK(verdict_to_json(Verdict{VerdictOk{10, 2}}).at("verdict") == "ok");
  Trace t;
  t.steps = {{Rule::Send, 0, 0}};
  CHECK(verdict_to_json(Verdict{VerdictDeadlock{t}}).at("verdict") == "deadlock");
  Violation v{Axiom::AtWait, 0, 2, "ordering", "detail", 3};
  json jv = verdict_to_json(Verdict{VerdictViolation{t, {v}}});
  CHECK(jv.at("verdict") == "violation");
  CHECK(jv.at("violations").size() == 1);
  CHECK(jv.at("violations")[0].at("axiom") == "AtWait");
  CHECK(verdict_to_json(Verdict{VerdictBound{99}}).at("states_visited") == 99);
}

TEST_CASE("malformed documents raise JsonError") {
  CHECK_THROWS_AS(expr_from_json(json::parse(R"({"op":"what"})")), JsonError);
  CHECK_THROWS_AS(command_from_json(json::parse(R"({"cmd":"what"})")), JsonError);
  CHECK_THROWS_AS(command_from_json(json::parse(R"({"no_cmd":1})")), JsonError);
  CHECK_THROWS_AS(expr_from_json(json::parse("null")), JsonError);
  CHECK_THROWS_AS(load_program_file("/nonexistent/path.json"), JsonError);
}

TEST_CASE("rule names round-trip") {
  for (Rule r : {Rule::IfTrue, Rule::IfFalse, Rule::While, Rule::Set, Rule::SeqSkip,
                 Rule::Send, Rule::Recv, Rule::WaitRecv, Rule::WaitSend,
                 Rule::TransferOnWait, Rule::TransferNoWait, Rule::FreeBuffer, Rule::Barrier}) {
    auto back = rule_from_name(rule_name(r));
    REQUIRE(back.has_value());
    CHECK(*back == r);
  }
  CHECK_FALSE(rule_from_name("NotARule").has_value());
}
