#include "mpicheck/monitor.hpp"

#include <set>

namespace mpicheck {

namespace {

// Cap for scanning the open interval (last_tag, v) for skipped tags.
// Well-formed specs bound barrier intervals at 32767 tags; mutants may wait
// on arbitrary tags, in which case the interval clause fires regardless.
constexpr std::int64_t kMaxTagScan = 1 << 20;

void collect_vars(const Expr& e, std::set<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return;
    case Expr::Kind::Var:
      out.insert(e.name);
      return;
    case Expr::Kind::Neg:
      collect_vars(*e.lhs, out);
      return;
    default:
      collect_vars(*e.lhs, out);
      collect_vars(*e.rhs, out);
  }
}

// Variable names the next step of this head command may evaluate: tag
// expressions, Set right-hand sides, If/While guards.
std::set<std::string> read_vars(const Command& head) {
  std::set<std::string> out;
  switch (head.kind) {
    case Command::Kind::IRecv:
    case Command::Kind::ISend:
    case Command::Kind::Wait:
    case Command::Kind::Set:
    case Command::Kind::If:
    case Command::Kind::While:
      collect_vars(*head.expr, out);
      break;
    default:
      break;
  }
  return out;
}

struct Checker {
  const GlobalState& s;
  const TopologySpec& spec;
  const int n;
  std::vector<Violation>& out;

  void flag(Axiom a, int rank, Tag tag, std::string clause, std::string detail) {
    out.push_back(Violation{a, rank, tag, std::move(clause), std::move(detail), 0});
  }

  // Flags any skipped tag in (last_tag, v) owned by `rank`.
  void check_no_skipped(Axiom a, int rank, std::int64_t last_tag, Tag v) {
    std::int64_t hi = v;
    if (hi - last_tag > kMaxTagScan) hi = last_tag + kMaxTagScan;
    for (Tag t = last_tag + 1; t < hi; ++t) {
      if (spec.sender(t, n) == rank || spec.receiver(t, n) == rank) {
        flag(a, rank, t, "skipped",
             "tag " + std::to_string(t) + " in (" + std::to_string(last_tag) + ", " +
                 std::to_string(v) + ") has rank " + std::to_string(rank) +
                 " as an endpoint but was never waited on");
      }
    }
  }

  void at_send(int i, const Command& h) {
    const ProcState& p = s.procs[i];
    Tag v = eval_expr(h.expr, p.env);
    if (spec.sender(v, n) != i) {
      flag(Axiom::AtSend, i, v, "rank",
           "rank " + std::to_string(i) + " is not sender(" + std::to_string(v) +
               ") = " + std::to_string(spec.sender(v, n)));
    }
    auto it = p.env.find(h.var);
    std::int64_t expect = spec.message(v, n);
    if (it == p.env.end()) {
      flag(Axiom::AtSend, i, v, "payload", "source variable '" + h.var + "' is unbound");
    } else if (it->second != expect) {
      flag(Axiom::AtSend, i, v, "payload",
           "payload " + std::to_string(it->second) + " != message(" + std::to_string(v) +
               ") = " + std::to_string(expect));
    }
    if (s.send_buf.count(v)) {
      flag(Axiom::AtSend, i, v, "duplicate",
           "tag " + std::to_string(v) + " already pending in the send buffer");
    }
  }

  void at_recv(int i, const Command& h) {
    Tag v = eval_expr(h.expr, s.procs[i].env);
    if (spec.receiver(v, n) != i) {
      flag(Axiom::AtRecv, i, v, "rank",
           "rank " + std::to_string(i) + " is not receiver(" + std::to_string(v) +
               ") = " + std::to_string(spec.receiver(v, n)));
    }
    if (s.recv_buf.count(v)) {
      flag(Axiom::AtRecv, i, v, "duplicate",
           "tag " + std::to_string(v) + " already pending in the receive buffer");
    }
  }

  void at_wait(int i, const Command& h) {
    const ProcState& p = s.procs[i];
    Tag v = eval_expr(h.expr, p.env);
    if (v <= p.last_tag) {
      flag(Axiom::AtWait, i, v, "ordering",
           "tag " + std::to_string(v) + " not greater than last completed tag " +
               std::to_string(p.last_tag));
    } else {
      check_no_skipped(Axiom::AtWait, i, p.last_tag, v);
    }
    Tag lo = spec.barrier_tag(p.barriers_passed, n);
    Tag hi = spec.barrier_tag(p.barriers_passed + 1, n);
    if (!(lo <= v && v < hi)) {
      flag(Axiom::AtWait, i, v, "interval",
           "tag " + std::to_string(v) + " outside barrier interval [" +
               std::to_string(lo) + ", " + std::to_string(hi) + ")");
    }
    bool as_sender = spec.sender(v, n) == i && s.send_buf.count(v) > 0;
    bool as_receiver = spec.receiver(v, n) == i && s.recv_buf.count(v) > 0;
    if (!as_sender && !as_receiver) {
      flag(Axiom::AtWait, i, v, "unposted",
           "wait on tag " + std::to_string(v) +
               " without a pending send or receive owned by rank " + std::to_string(i));
    }
  }

  void at_barrier(int i) {
    const ProcState& p = s.procs[i];
    Tag v = spec.barrier_tag(p.barriers_passed + 1, n);
    if (v <= p.last_tag) {
      flag(Axiom::AtBarrier, i, v, "order",
           "barrier tag " + std::to_string(v) + " not greater than last completed tag " +
               std::to_string(p.last_tag));
    } else {
      check_no_skipped(Axiom::AtBarrier, i, p.last_tag, v);
    }
    for (const auto& [t, x] : s.send_buf) {
      (void)x;
      if (spec.sender(t, n) == i) {
        flag(Axiom::AtBarrier, i, t, "pending-send",
             "send of tag " + std::to_string(t) + " still pending at barrier");
      }
    }
    for (const auto& [t, x] : s.recv_buf) {
      (void)x;
      if (spec.receiver(t, n) == i) {
        flag(Axiom::AtBarrier, i, t, "pending-recv",
             "receive of tag " + std::to_string(t) + " still pending at barrier");
      }
    }
  }

  void at_end(int i) {
    const ProcState& p = s.procs[i];
    std::int64_t count = spec.barrier_count(n);
    if (p.barriers_passed != count) {
      flag(Axiom::AtEnd, i, -1, "count",
           "terminated after " + std::to_string(p.barriers_passed) +
               " barriers, barrier_count = " + std::to_string(count));
    }
  }

  void at_set(int i, const Command& h) {
    for (const auto& [t, x] : s.send_buf) {
      if (spec.sender(t, n) == i && x == h.var) {
        flag(Axiom::AtSet, i, t, "pending-send",
             "set of '" + h.var + "' while it backs the pending send of tag " +
                 std::to_string(t));
      }
    }
    for (const auto& [t, x] : s.recv_buf) {
      if (spec.receiver(t, n) == i && x == h.var) {
        flag(Axiom::AtSet, i, t, "pending-recv",
             "set of '" + h.var + "' while it is the target of the pending receive of tag " +
                 std::to_string(t));
      }
    }
    if (h.var == "rank") {
      flag(Axiom::AtSet, i, -1, "rank", "set of the reserved variable 'rank'");
    }
  }

  void at_read(int i, const Command& h) {
    std::set<std::string> reads = read_vars(h);
    if (reads.empty()) return;
    for (const auto& [t, x] : s.recv_buf) {
      if (spec.receiver(t, n) == i && reads.count(x)) {
        flag(Axiom::AtRead, i, t, "pending-recv",
             "read of '" + x + "' while it is the target of the pending receive of tag " +
                 std::to_string(t));
      }
    }
  }
};

}  // namespace

const char* axiom_name(Axiom a) {
  switch (a) {
    case Axiom::AtStart: return "AtStart";
    case Axiom::AtSend: return "AtSend";
    case Axiom::AtRecv: return "AtRecv";
    case Axiom::AtWait: return "AtWait";
    case Axiom::AtBarrier: return "AtBarrier";
    case Axiom::AtEnd: return "AtEnd";
    case Axiom::AtSet: return "AtSet";
    case Axiom::AtRead: return "AtRead";
  }
  return "?";
}

std::string violation_to_string(const Violation& v) {
  std::string s = std::string(axiom_name(v.axiom)) + "[" + v.clause + "] at p" +
                  std::to_string(v.rank);
  if (v.tag >= 0) s += " (tag " + std::to_string(v.tag) + ")";
  s += ", state " + std::to_string(v.state_index) + ": " + v.detail;
  return s;
}

std::vector<Violation> check_process(const GlobalState& s, int rank,
                                     const TopologySpec& spec) {
  std::vector<Violation> out;
  Checker c{s, spec, static_cast<int>(s.procs.size()), out};
  const ProcState& p = s.procs[rank];

  if (p.cmd->kind == Command::Kind::Skip) {
    c.at_end(rank);
    return out;
  }
  const Command& h = head_command(*p.cmd);
  try {
    switch (h.kind) {
      case Command::Kind::ISend: c.at_send(rank, h); break;
      case Command::Kind::IRecv: c.at_recv(rank, h); break;
      case Command::Kind::Wait: c.at_wait(rank, h); break;
      case Command::Kind::Barrier: c.at_barrier(rank); break;
      case Command::Kind::Set: c.at_set(rank, h); break;
      default: break;
    }
  } catch (const EvalError& e) {
    // An unevaluable head expression is itself a program defect; report it
    // under the axiom whose premise was being evaluated.
    Axiom a = Axiom::AtSet;
    if (h.kind == Command::Kind::ISend) a = Axiom::AtSend;
    if (h.kind == Command::Kind::IRecv) a = Axiom::AtRecv;
    if (h.kind == Command::Kind::Wait) a = Axiom::AtWait;
    if (h.kind == Command::Kind::Barrier) a = Axiom::AtBarrier;
    c.flag(a, rank, -1, "eval", e.what());
  }
  c.at_read(rank, h);
  return out;
}

std::vector<Violation> check_state(const GlobalState& s, const TopologySpec& spec) {
  std::vector<Violation> out;
  for (int i = 0; i < static_cast<int>(s.procs.size()); ++i) {
    auto v = check_process(s, i, spec);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<Violation> check_initial(const GlobalState& s) {
  std::vector<Violation> out;
  auto flag = [&](int rank, std::string detail) {
    out.push_back(Violation{Axiom::AtStart, rank, -1, "shape", std::move(detail), 0});
  };
  const int n = static_cast<int>(s.procs.size());
  if (n < 2) flag(-1, "fewer than 2 processes");
  if (!s.recv_buf.empty() || !s.send_buf.empty() || !s.msg_buf.empty())
    flag(-1, "buffers not empty at start");
  for (int i = 0; i < n; ++i) {
    const ProcState& p = s.procs[i];
    auto rank_it = p.env.find("rank");
    auto size_it = p.env.find("size");
    if (rank_it == p.env.end() || rank_it->second != i)
      flag(i, "env does not bind rank to " + std::to_string(i));
    if (size_it == p.env.end() || size_it->second != n)
      flag(i, "env does not bind size to " + std::to_string(n));
    if (p.last_tag != -1) flag(i, "last_tag not -1");
    if (p.barriers_passed != 0) flag(i, "barriers_passed not 0");
    if (!ends_in_barrier(*p.cmd)) flag(i, "command sequence does not end in a barrier");
  }
  return out;
}

std::vector<Violation> monitor_trace(const Trace& trace, const TopologySpec& spec) {
  std::vector<Violation> out;
  auto on_state = [&](const GlobalState& s, std::size_t index) {
    if (index == 0) {
      for (Violation v : check_initial(s)) {
        v.state_index = 0;
        out.push_back(std::move(v));
      }
    }
    for (Violation v : check_state(s, spec)) {
      v.state_index = index;
      out.push_back(std::move(v));
    }
  };
  replay_trace(trace, spec, on_state);
  return out;
}

std::vector<std::string> check_lemmas(const GlobalState& s, const TopologySpec& spec) {
  std::vector<std::string> out;
  const int n = static_cast<int>(s.procs.size());

  // NumberOfBarriers.
  std::int64_t count = spec.barrier_count(n);
  for (int i = 0; i < n; ++i) {
    const ProcState& p = s.procs[i];
    if (p.cmd->kind != Command::Kind::Skip && ends_in_barrier(*p.cmd) &&
        p.barriers_passed >= count) {
      out.push_back("NumberOfBarriers: p" + std::to_string(i) + " passed " +
                    std::to_string(p.barriers_passed) + " barriers with its final barrier ahead");
    }
  }

  // NoTwoTagsTheSame, on states where every process is blocked or done.
  bool candidate = true;
  for (int i = 0; i < n && candidate; ++i) {
    switch (classify_proc(s, i, spec)) {
      case ProcClass::OnSend:
      case ProcClass::OnRecv:
      case ProcClass::OnBarrier:
      case ProcClass::Terminated:
        break;
      default:
        candidate = false;
    }
  }
  if (candidate) {
    std::set<Tag> seen;
    for (int i = 0; i < n; ++i) {
      const ProcState& p = s.procs[i];
      if (p.cmd->kind == Command::Kind::Skip) continue;
      const Command& h = head_command(*p.cmd);
      if (h.kind != Command::Kind::Wait) continue;
      Tag t = eval_expr(h.expr, p.env);
      if (!seen.insert(t).second) {
        out.push_back("NoTwoTagsTheSame: two blocked processes wait on tag " +
                      std::to_string(t));
      }
    }
  }
  return out;
}

}  // namespace mpicheck
