#include "mpicheck/explorer.hpp"

#include <mutex>
#include <random>
#include <sstream>
#include <unordered_set>

namespace mpicheck {

namespace {

constexpr std::size_t kLocalChainCap = 1 << 20;

bool is_local_rule(Rule r) {
  switch (r) {
    case Rule::IfTrue:
    case Rule::IfFalse:
    case Rule::While:
    case Rule::Set:
    case Rule::SeqSkip:
      return true;
    default:
      return false;
  }
}

// Insert-if-absent set of state digests. Exploration workers may share one;
// locking is internal.
class VisitedSet {
 public:
  bool insert(const Digest& d) {
    std::lock_guard<std::mutex> lock(mu_);
    return set_.insert(d).second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return set_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_set<Digest, DigestHash> set_;
};

struct Succ {
  GlobalState state;
  std::vector<Transition> steps;
};

class Search {
 public:
  Search(const TopologySpec& spec, const ExploreBounds& bounds, bool monitor,
         const ExploreHooks* hooks)
      : spec_(spec), bounds_(bounds), monitor_(monitor), hooks_(hooks) {}

  Verdict run(GlobalState s0) {
    initial_ = s0;
    normalize(s0, path_);

    struct Frame {
      Digest digest;
      std::vector<Succ> succs;
      std::size_t next = 0;
      std::size_t path_len = 0;
    };
    std::vector<Frame> stack;

    auto enter = [&](GlobalState state, const Digest& digest) -> std::optional<Verdict> {
      // Caller has already established the state is new.
      if (hooks_ && hooks_->on_state) hooks_->on_state(state, digest);
      if (monitor_) {
        auto viols = check_state(state, spec_);
        if (!viols.empty()) {
          for (auto& v : viols) v.state_index = path_.size();
          return Verdict{VerdictViolation{Trace{initial_, path_}, std::move(viols)}};
        }
        auto lemmas = check_lemmas(state, spec_);
        if (!lemmas.empty()) {
          throw std::logic_error("lemma invariant failed on a violation-free state: " +
                                 lemmas.front());
        }
      }
      auto succs = successors(state);
      if (succs.empty()) {
        if (is_terminated(state)) {
          ++terminal_states_;
          if (hooks_ && hooks_->on_terminal) hooks_->on_terminal(state, digest);
          return std::nullopt;
        }
        return Verdict{VerdictDeadlock{Trace{initial_, path_}}};
      }
      stack.push_back(Frame{digest, std::move(succs), 0, path_.size()});
      return std::nullopt;
    };

    Digest d0 = canonical_hash(s0);
    visited_.insert(d0);
    if (auto v = enter(std::move(s0), d0)) return *v;

    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next >= f.succs.size()) {
        path_.resize(f.path_len);
        stack.pop_back();
        continue;
      }
      Succ sc = std::move(f.succs[f.next++]);
      path_.resize(f.path_len);
      if (f.path_len + sc.steps.size() > bounds_.max_depth) {
        bound_hit_ = true;
        continue;
      }
      Digest d = canonical_hash(sc.state);
      if (hooks_ && hooks_->on_edge) {
        std::string label;
        for (const auto& t : sc.steps) {
          if (!label.empty()) label += ", ";
          label += transition_to_string(t);
        }
        hooks_->on_edge(f.digest, d, label);
      }
      if (!visited_.insert(d)) continue;
      if (visited_.size() > bounds_.max_states) {
        return Verdict{VerdictBound{visited_.size()}};
      }
      path_.insert(path_.end(), sc.steps.begin(), sc.steps.end());
      if (auto v = enter(std::move(sc.state), d)) return *v;
    }

    if (bound_hit_) return Verdict{VerdictBound{visited_.size()}};
    return Verdict{VerdictOk{visited_.size(), terminal_states_}};
  }

 private:
  // Applies every enabled FreeBuffer once. Freeing one tag never enables
  // freeing another, so a single pass is complete.
  void normalize(GlobalState& s, std::vector<Transition>& steps) {
    if (bounds_.free_buffer_policy != FreeBufferPolicy::Eager) return;
    const int n = static_cast<int>(s.procs.size());
    std::vector<Tag> to_free;
    for (const auto& [t, v] : s.msg_buf) {
      (void)v;
      std::int64_t snd = spec_.sender(t, n);
      std::int64_t rcv = spec_.receiver(t, n);
      if (snd < 0 || snd >= n || rcv < 0 || rcv >= n) continue;
      if (s.procs[snd].last_tag >= t && s.procs[rcv].last_tag >= t) to_free.push_back(t);
    }
    for (Tag t : to_free) {
      s.msg_buf.erase(t);
      steps.push_back({Rule::FreeBuffer, -1, t});
    }
  }

  // Runs the local-rule chain of one process to its end. When monitoring,
  // each intermediate state gets that process's axiom checks; the chain is
  // truncated at the first violating state so the regular state intake
  // reports it with the right trace.
  Succ compress_chain(const GlobalState& s, int rank) {
    Succ sc{s, {}};
    while (sc.steps.size() < kLocalChainCap) {
      auto step = local_step(sc.state.procs[rank]);
      if (!step) break;
      sc.steps.push_back({step->rule, rank, -1});
      sc.state.procs[rank] = std::move(step->next);
      if (monitor_ && !check_process(sc.state, rank, spec_).empty()) break;
    }
    if (sc.steps.size() >= kLocalChainCap) bound_hit_ = true;
    return sc;
  }

  std::vector<Succ> successors(const GlobalState& s) {
    auto enabled = enabled_transitions(s, spec_);
    std::vector<Succ> out;
    for (const Transition& tr : enabled) {
      if (is_local_rule(tr.rule)) {
        if (bounds_.compress_local) {
          out.push_back(compress_chain(s, tr.rank));
        } else {
          out.push_back(Succ{apply_transition(s, tr, spec_), {tr}});
        }
        continue;
      }
      if (tr.rule == Rule::FreeBuffer &&
          bounds_.free_buffer_policy != FreeBufferPolicy::Explore) {
        continue;
      }
      out.push_back(Succ{apply_transition(s, tr, spec_), {tr}});
    }
    for (Succ& sc : out) normalize(sc.state, sc.steps);
    return out;
  }

  const TopologySpec& spec_;
  const ExploreBounds& bounds_;
  bool monitor_;
  const ExploreHooks* hooks_;

  GlobalState initial_;
  std::vector<Transition> path_;
  VisitedSet visited_;
  std::size_t terminal_states_ = 0;
  bool bound_hit_ = false;
};

void require_valid(const TopologySpec& spec, int n) {
  auto errors = validate_topology(spec, n, n);
  if (has_errors(errors)) {
    std::string msg = "topology spec invalid at N=" + std::to_string(n) + ":";
    for (const auto& e : errors) {
      if (!e.warning) msg += "\n  " + spec_error_to_string(e);
    }
    throw std::invalid_argument(msg);
  }
}

}  // namespace

bool verdict_is_ok(const Verdict& v) { return std::holds_alternative<VerdictOk>(v); }

std::string verdict_summary(const Verdict& v) {
  std::ostringstream os;
  if (const auto* ok = std::get_if<VerdictOk>(&v)) {
    os << "ok: " << ok->states_visited << " states visited, " << ok->terminal_states
       << " terminal";
  } else if (const auto* dl = std::get_if<VerdictDeadlock>(&v)) {
    os << "deadlock after " << dl->trace.steps.size() << " steps";
  } else if (const auto* vi = std::get_if<VerdictViolation>(&v)) {
    os << vi->violations.size() << " violation(s), first: "
       << violation_to_string(vi->violations.front());
  } else if (const auto* b = std::get_if<VerdictBound>(&v)) {
    os << "bound exceeded after " << b->states_visited << " states";
  }
  return os.str();
}

Verdict explore(const CommandPtr& program, const TopologySpec& spec, int n,
                const ExploreBounds& bounds, bool monitor, const ExploreHooks* hooks) {
  require_valid(spec, n);
  Search search(spec, bounds, monitor, hooks);
  return search.run(initial_state(program, n));
}

std::pair<Trace, Verdict> run_schedule(const CommandPtr& program, const TopologySpec& spec,
                                       int n, std::uint64_t seed, bool monitor,
                                       const ExploreBounds& bounds) {
  require_valid(spec, n);
  GlobalState init = initial_state(program, n);
  Trace trace{init, {}};
  GlobalState s = init;
  std::mt19937_64 rng(seed);
  std::vector<Violation> viols;

  auto normalize = [&] {
    if (bounds.free_buffer_policy != FreeBufferPolicy::Eager) return;
    for (const Transition& tr : enabled_transitions(s, spec)) {
      if (tr.rule != Rule::FreeBuffer) continue;
      s = apply_transition(s, tr, spec);
      trace.steps.push_back(tr);
    }
  };
  auto check = [&] {
    if (!monitor) return;
    for (Violation v : check_state(s, spec)) {
      v.state_index = trace.steps.size();
      viols.push_back(std::move(v));
    }
  };

  normalize();
  check();
  bool bound = false;
  for (;;) {
    if (trace.steps.size() >= bounds.max_depth) {
      bound = true;
      break;
    }
    std::vector<Transition> choices;
    for (const Transition& tr : enabled_transitions(s, spec)) {
      if (tr.rule == Rule::FreeBuffer &&
          bounds.free_buffer_policy != FreeBufferPolicy::Explore) {
        continue;
      }
      choices.push_back(tr);
    }
    if (choices.empty()) break;
    std::uniform_int_distribution<std::size_t> dist(0, choices.size() - 1);
    const Transition tr = choices[dist(rng)];
    s = apply_transition(s, tr, spec);
    trace.steps.push_back(tr);
    normalize();
    check();
  }

  Verdict verdict;
  if (monitor && !viols.empty()) {
    verdict = VerdictViolation{trace, std::move(viols)};
  } else if (bound) {
    verdict = VerdictBound{trace.steps.size()};
  } else if (is_terminated(s)) {
    verdict = VerdictOk{trace.steps.size() + 1, 1};
  } else {
    verdict = VerdictDeadlock{trace};
  }
  return {std::move(trace), std::move(verdict)};
}

}  // namespace mpicheck
