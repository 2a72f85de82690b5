#include <doctest.h>

#include <set>

#include "fig5_fixture.hpp"
#include "mpicheck/explorer.hpp"

using namespace mpicheck;

namespace {

ExploreBounds rule_level_bounds() {
  ExploreBounds b;
  b.compress_local = false;
  b.free_buffer_policy = FreeBufferPolicy::Never;
  return b;
}

}  // namespace

TEST_CASE("fig5 exploration visits all ten boxed states and only clean terminals") {
  auto f = fig5::make();
  std::set<Digest> visited;
  std::size_t terminals = 0;
  ExploreHooks hooks;
  hooks.on_state = [&](const GlobalState&, const Digest& d) { visited.insert(d); };
  hooks.on_terminal = [&](const GlobalState& s, const Digest&) {
    ++terminals;
    CHECK(s.procs[1].env.at("x") == 5);
    CHECK(is_terminated(s));
  };
  Verdict v = explore(f.model.program, f.model.spec, 2, rule_level_bounds(), true, &hooks);
  REQUIRE(verdict_is_ok(v));
  for (std::size_t i = 0; i < f.states.size(); ++i) {
    INFO("boxed state " << i);
    CHECK(visited.count(canonical_hash(f.states[i])) == 1);
  }
  CHECK(terminals == std::get<VerdictOk>(v).terminal_states);
  CHECK(std::get<VerdictOk>(v).terminal_states == 1);
}

TEST_CASE("fig5 exploration is clean under every policy combination") {
  auto f = fig5::make();
  for (bool compress : {false, true}) {
    for (FreeBufferPolicy fb :
         {FreeBufferPolicy::Explore, FreeBufferPolicy::Eager, FreeBufferPolicy::Never}) {
      ExploreBounds b;
      b.compress_local = compress;
      b.free_buffer_policy = fb;
      Verdict v = explore(f.model.program, f.model.spec, 2, b, true);
      INFO("compress=" << compress << " fb=" << static_cast<int>(fb));
      CHECK(verdict_is_ok(v));
    }
  }
}

TEST_CASE("exploration deduplicates: both rows converge") {
  auto f = fig5::make();
  // Rule-level exploration visits each state once even though state 5 is
  // reachable along both rows.
  std::size_t states = 0;
  ExploreHooks hooks;
  hooks.on_state = [&](const GlobalState&, const Digest&) { ++states; };
  Verdict v = explore(f.model.program, f.model.spec, 2, rule_level_bounds(), false, &hooks);
  REQUIRE(verdict_is_ok(v));
  CHECK(states == std::get<VerdictOk>(v).states_visited);
}

TEST_CASE("deadlock/stuckness cross-check holds on every explored state") {
  auto f = fig5::make();
  ExploreHooks hooks;
  hooks.on_state = [&](const GlobalState& s, const Digest&) {
    CHECK(is_deadlock(s, f.model.spec) == is_stuck(s, f.model.spec));
  };
  Verdict v = explore(f.model.program, f.model.spec, 2, rule_level_bounds(), true, &hooks);
  CHECK(verdict_is_ok(v));
}

TEST_CASE("tiny benchmark models explore clean with one terminal state") {
  for (const auto& model : {convection_model(2), poisson_model(1), heat_model(1)}) {
    for (int n : {2, 3}) {
      INFO(model.name << " N=" << n);
      ExploreHooks hooks;
      hooks.on_state = [&](const GlobalState& s, const Digest&) {
        CHECK(is_deadlock(s, model.spec) == is_stuck(s, model.spec));
      };
      Verdict v = explore(model.program, model.spec, n, {}, true, &hooks);
      REQUIRE_MESSAGE(verdict_is_ok(v), verdict_summary(v));
      CHECK(std::get<VerdictOk>(v).terminal_states == 1);
    }
  }
}

TEST_CASE("local compression yields the same verdict and terminals as rule level") {
  auto model = convection_model(2);
  ExploreBounds plain = {};
  plain.compress_local = false;
  ExploreBounds compressed = {};
  compressed.compress_local = true;

  std::set<Digest> terminals_plain, terminals_compressed;
  ExploreHooks h1, h2;
  h1.on_terminal = [&](const GlobalState&, const Digest& d) { terminals_plain.insert(d); };
  h2.on_terminal = [&](const GlobalState&, const Digest& d) { terminals_compressed.insert(d); };
  Verdict v1 = explore(model.program, model.spec, 3, plain, true, &h1);
  Verdict v2 = explore(model.program, model.spec, 3, compressed, true, &h2);
  REQUIRE(verdict_is_ok(v1));
  REQUIRE(verdict_is_ok(v2));
  CHECK(terminals_plain == terminals_compressed);
  // Compression must not visit more states than the rule-level search.
  CHECK(std::get<VerdictOk>(v2).states_visited <= std::get<VerdictOk>(v1).states_visited);
}

TEST_CASE("FreeBuffer timing does not affect terminal environments") {
  auto model = convection_model(2);
  std::set<Digest> term_explore, term_eager;
  auto strip_digest = [](const GlobalState& s) {
    // Digest of the processes only: terminal envs must agree even when the
    // message buffer differs by FreeBuffer timing.
    GlobalState t = s;
    t.msg_buf.clear();
    return canonical_hash(t);
  };
  ExploreHooks h1, h2;
  h1.on_terminal = [&](const GlobalState& s, const Digest&) { term_explore.insert(strip_digest(s)); };
  h2.on_terminal = [&](const GlobalState& s, const Digest&) { term_eager.insert(strip_digest(s)); };
  ExploreBounds explore_fb;
  explore_fb.free_buffer_policy = FreeBufferPolicy::Explore;
  ExploreBounds eager_fb;
  eager_fb.free_buffer_policy = FreeBufferPolicy::Eager;
  REQUIRE(verdict_is_ok(explore(model.program, model.spec, 2, explore_fb, false, &h1)));
  REQUIRE(verdict_is_ok(explore(model.program, model.spec, 2, eager_fb, false, &h2)));
  CHECK(term_explore == term_eager);
  CHECK(term_explore.size() == 1);
}

TEST_CASE("every mutant is caught by the monitor") {
  for (const auto& m : mutant_models()) {
    INFO(m.name);
    Verdict v = explore(m.program, m.spec, 2, {}, true);
    REQUIRE(std::holds_alternative<VerdictViolation>(v));
    const auto& info = std::get<VerdictViolation>(v);
    REQUIRE_FALSE(info.violations.empty());
    // The counterexample trace replays to the reported violations.
    GlobalState end = replay_trace(info.trace, m.spec);
    auto vs = check_state(end, m.spec);
    CHECK_FALSE(vs.empty());
    for (const auto& viol : info.violations) {
      CHECK(viol.state_index == info.trace.steps.size());
    }
  }
}

TEST_CASE("mutants: advisory monitoring reports the targeted axiom") {
  for (const auto& m : mutant_models()) {
    INFO(m.name);
    REQUIRE(m.target_axiom.has_value());
    bool found = false;
    for (std::uint64_t seed = 0; seed < 4 && !found; ++seed) {
      auto [trace, verdict] = run_schedule(m.program, m.spec, 2, seed, true);
      if (const auto* vi = std::get_if<VerdictViolation>(&verdict)) {
        for (const auto& v : vi->violations) found |= v.axiom == *m.target_axiom;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("deadlocking mutants reach a deadlock with the monitor off") {
  std::size_t deadlocking = 0;
  for (const auto& m : mutant_models()) {
    INFO(m.name);
    Verdict v = explore(m.program, m.spec, 2, {}, false);
    if (m.expect_deadlock) {
      ++deadlocking;
      REQUIRE_MESSAGE(std::holds_alternative<VerdictDeadlock>(v), verdict_summary(v));
      const Trace& trace = std::get<VerdictDeadlock>(v).trace;
      GlobalState end = replay_trace(trace, m.spec);
      CHECK(is_deadlock(end, m.spec));
      CHECK(is_stuck(end, m.spec));
    } else {
      CHECK_MESSAGE(verdict_is_ok(v), verdict_summary(v));
    }
  }
  CHECK(deadlocking >= 3);
}

TEST_CASE("unavoidable deadlock: every seed deadlocks the never-sent mutant") {
  auto mutants = mutant_models();
  const auto& m = mutants[0];
  REQUIRE(m.name == "deadlock_no_send");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [trace, verdict] = run_schedule(m.program, m.spec, 2, seed, false);
    CHECK(std::holds_alternative<VerdictDeadlock>(verdict));
  }
}

TEST_CASE("seeded schedules are reproducible and confluent") {
  auto f = fig5::make();
  auto [t1, v1] = run_schedule(f.model.program, f.model.spec, 2, 7, false);
  auto [t2, v2] = run_schedule(f.model.program, f.model.spec, 2, 7, false);
  REQUIRE(t1.steps.size() == t2.steps.size());
  for (std::size_t i = 0; i < t1.steps.size(); ++i) CHECK(t1.steps[i] == t2.steps[i]);

  // Different seeds may produce different traces but identical terminal envs.
  std::set<std::int64_t> xs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto [t, v] = run_schedule(f.model.program, f.model.spec, 2, seed, true);
    REQUIRE_MESSAGE(verdict_is_ok(v), verdict_summary(v));
    GlobalState end = replay_trace(t, f.model.spec);
    REQUIRE(is_terminated(end));
    xs.insert(end.procs[1].env.at("x"));
  }
  CHECK(xs == std::set<std::int64_t>{5});
}

TEST_CASE("state bound yields BoundExceeded") {
  auto model = convection_model(3);
  ExploreBounds b;
  b.max_states = 5;
  Verdict v = explore(model.program, model.spec, 2, b, false);
  CHECK(std::holds_alternative<VerdictBound>(v));
}

TEST_CASE("explore rejects invalid topology specs") {
  auto f = fig5::make();
  TopologySpec bad = f.model.spec;
  bad.barrier_tag = [](std::int64_t id, int) { return id * 40000; };
  CHECK_THROWS_AS(explore(f.model.program, bad, 2, {}, false), std::invalid_argument);
}

TEST_CASE("edge hook sees the explored graph") {
  auto f = fig5::make();
  std::size_t edges = 0;
  ExploreHooks hooks;
  hooks.on_edge = [&](const Digest&, const Digest&, const std::string& label) {
    ++edges;
    CHECK_FALSE(label.empty());
  };
  REQUIRE(verdict_is_ok(explore(f.model.program, f.model.spec, 2, rule_level_bounds(), false, &hooks)));
  CHECK(edges > 10);
}
