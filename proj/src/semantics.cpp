#include "mpicheck/semantics.hpp"

#include <algorithm>
#include <tuple>

namespace mpicheck {

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::IfTrue: return "IfTrue";
    case Rule::IfFalse: return "IfFalse";
    case Rule::While: return "While";
    case Rule::Set: return "Set";
    case Rule::SeqSkip: return "SeqSkip";
    case Rule::Send: return "Send";
    case Rule::Recv: return "Recv";
    case Rule::WaitRecv: return "WaitRecv";
    case Rule::WaitSend: return "WaitSend";
    case Rule::TransferOnWait: return "TransferOnWait";
    case Rule::TransferNoWait: return "TransferNoWait";
    case Rule::FreeBuffer: return "FreeBuffer";
    case Rule::Barrier: return "Barrier";
  }
  return "?";
}

std::optional<Rule> rule_from_name(const std::string& name) {
  static const Rule all[] = {
      Rule::IfTrue,  Rule::IfFalse,        Rule::While,          Rule::Set,
      Rule::SeqSkip, Rule::Send,           Rule::Recv,           Rule::WaitRecv,
      Rule::WaitSend, Rule::TransferOnWait, Rule::TransferNoWait, Rule::FreeBuffer,
      Rule::Barrier};
  for (Rule r : all) {
    if (name == rule_name(r)) return r;
  }
  return std::nullopt;
}

std::string transition_to_string(const Transition& t) {
  std::string s = rule_name(t.rule);
  if (t.rank >= 0) s += "@p" + std::to_string(t.rank);
  if (t.tag >= 0 || t.rule == Rule::TransferNoWait || t.rule == Rule::FreeBuffer)
    s += "(tag " + std::to_string(t.tag) + ")";
  return s;
}

namespace {

struct CmdStep {
  CommandPtr next;
  Rule rule;
  bool assigns = false;
  std::string var;
  std::int64_t value = 0;
};

std::optional<CmdStep> step_cmd(const CommandPtr& c, const Env& env) {
  switch (c->kind) {
    case Command::Kind::Seq: {
      if (c->a->kind == Command::Kind::Skip)
        return CmdStep{c->b, Rule::SeqSkip, false, {}, 0};
      if (auto inner = step_cmd(c->a, env)) {
        inner->next = cmd_seq(inner->next, c->b);
        return inner;
      }
      return std::nullopt;
    }
    case Command::Kind::If: {
      std::int64_t v = eval_expr(c->expr, env);
      if (v != 0) return CmdStep{c->a, Rule::IfTrue, false, {}, 0};
      return CmdStep{c->b, Rule::IfFalse, false, {}, 0};
    }
    case Command::Kind::While:
      return CmdStep{cmd_if(c->expr, cmd_seq(c->a, c), cmd_skip()), Rule::While, false, {}, 0};
    case Command::Kind::Set: {
      std::int64_t v = eval_expr(c->expr, env);
      return CmdStep{cmd_skip(), Rule::Set, true, c->var, v};
    }
    default:
      return std::nullopt;
  }
}

bool terminated(const ProcState& p) { return p.cmd->kind == Command::Kind::Skip; }

// Rank returned by a spec function, or -1 when it is not a live rank.
int rank_or_none(std::int64_t r, int n) {
  return (r >= 0 && r < n) ? static_cast<int>(r) : -1;
}

bool sender_may_transfer(const ProcState& sender) {
  if (terminated(sender)) return true;  // a lone skip is neither wait nor barrier
  Command::Kind k = head_command(*sender.cmd).kind;
  return k != Command::Kind::Wait && k != Command::Kind::Barrier;
}

}  // namespace

std::optional<LocalStep> local_step(const ProcState& p) {
  if (terminated(p)) return std::nullopt;
  auto step = step_cmd(p.cmd, p.env);
  if (!step) return std::nullopt;
  ProcState next = p;
  next.cmd = step->next;
  if (step->assigns) next.env[step->var] = step->value;
  return LocalStep{std::move(next), step->rule};
}

std::vector<Transition> enabled_transitions(const GlobalState& s, const TopologySpec& spec) {
  std::vector<Transition> out;
  const int n = static_cast<int>(s.procs.size());
  int barrier_heads = 0;

  for (int i = 0; i < n; ++i) {
    const ProcState& p = s.procs[i];
    if (terminated(p)) continue;
    const Command& h = head_command(*p.cmd);
    switch (h.kind) {
      case Command::Kind::If: {
        std::int64_t v = eval_expr(h.expr, p.env);
        out.push_back({v != 0 ? Rule::IfTrue : Rule::IfFalse, i, -1});
        break;
      }
      case Command::Kind::While:
        out.push_back({Rule::While, i, -1});
        break;
      case Command::Kind::Set:
        out.push_back({Rule::Set, i, -1});
        break;
      case Command::Kind::Skip:  // head of a Seq
        out.push_back({Rule::SeqSkip, i, -1});
        break;
      case Command::Kind::ISend:
        out.push_back({Rule::Send, i, eval_expr(h.expr, p.env)});
        break;
      case Command::Kind::IRecv:
        out.push_back({Rule::Recv, i, eval_expr(h.expr, p.env)});
        break;
      case Command::Kind::Wait: {
        Tag t = eval_expr(h.expr, p.env);
        bool in_bm = s.msg_buf.count(t) > 0;
        if (rank_or_none(spec.receiver(t, n), n) == i) {
          if (s.recv_buf.count(t) && in_bm) out.push_back({Rule::WaitRecv, i, t});
          auto bs = s.send_buf.find(t);
          if (bs != s.send_buf.end() && !in_bm) {
            int snd = rank_or_none(spec.sender(t, n), n);
            if (snd >= 0 && s.procs[snd].env.count(bs->second))
              out.push_back({Rule::TransferOnWait, i, t});
          }
        }
        if (rank_or_none(spec.sender(t, n), n) == i && in_bm)
          out.push_back({Rule::WaitSend, i, t});
        break;
      }
      case Command::Kind::Barrier:
        ++barrier_heads;
        break;
      case Command::Kind::Seq:
        break;  // unreachable: head_command never returns a Seq
    }
  }

  for (const auto& [t, x] : s.send_buf) {
    if (s.msg_buf.count(t)) continue;
    int snd = rank_or_none(spec.sender(t, n), n);
    if (snd < 0) continue;
    const ProcState& sp = s.procs[snd];
    if (!sender_may_transfer(sp)) continue;
    if (!sp.env.count(x)) continue;
    out.push_back({Rule::TransferNoWait, snd, t});
  }

  for (const auto& [t, v] : s.msg_buf) {
    (void)v;
    int snd = rank_or_none(spec.sender(t, n), n);
    int rcv = rank_or_none(spec.receiver(t, n), n);
    if (snd < 0 || rcv < 0) continue;
    if (s.procs[snd].last_tag >= t && s.procs[rcv].last_tag >= t)
      out.push_back({Rule::FreeBuffer, -1, t});
  }

  if (n > 0 && barrier_heads == n) out.push_back({Rule::Barrier, -1, -1});

  std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) {
    return std::tuple(static_cast<int>(a.rule), a.rank, a.tag) <
           std::tuple(static_cast<int>(b.rule), b.rank, b.tag);
  });
  return out;
}

bool transition_enabled(const GlobalState& s, const Transition& tr, const TopologySpec& spec) {
  const int n = static_cast<int>(s.procs.size());
  auto valid_rank = [&](int r) { return r >= 0 && r < n; };

  switch (tr.rule) {
    case Rule::IfTrue:
    case Rule::IfFalse:
    case Rule::While:
    case Rule::Set:
    case Rule::SeqSkip: {
      if (!valid_rank(tr.rank)) return false;
      auto step = local_step(s.procs[tr.rank]);
      return step && step->rule == tr.rule;
    }
    case Rule::Send:
    case Rule::Recv: {
      if (!valid_rank(tr.rank)) return false;
      const ProcState& p = s.procs[tr.rank];
      if (terminated(p)) return false;
      const Command& h = head_command(*p.cmd);
      Command::Kind want =
          tr.rule == Rule::Send ? Command::Kind::ISend : Command::Kind::IRecv;
      return h.kind == want && eval_expr(h.expr, p.env) == tr.tag;
    }
    case Rule::WaitRecv:
    case Rule::WaitSend:
    case Rule::TransferOnWait: {
      if (!valid_rank(tr.rank)) return false;
      const ProcState& p = s.procs[tr.rank];
      if (terminated(p)) return false;
      const Command& h = head_command(*p.cmd);
      if (h.kind != Command::Kind::Wait || eval_expr(h.expr, p.env) != tr.tag)
        return false;
      Tag t = tr.tag;
      bool in_bm = s.msg_buf.count(t) > 0;
      if (tr.rule == Rule::WaitSend)
        return rank_or_none(spec.sender(t, n), n) == tr.rank && in_bm;
      if (rank_or_none(spec.receiver(t, n), n) != tr.rank) return false;
      if (tr.rule == Rule::WaitRecv) return s.recv_buf.count(t) && in_bm;
      // TransferOnWait
      auto bs = s.send_buf.find(t);
      if (bs == s.send_buf.end() || in_bm) return false;
      int snd = rank_or_none(spec.sender(t, n), n);
      return snd >= 0 && s.procs[snd].env.count(bs->second) > 0;
    }
    case Rule::TransferNoWait: {
      auto bs = s.send_buf.find(tr.tag);
      if (bs == s.send_buf.end() || s.msg_buf.count(tr.tag)) return false;
      int snd = rank_or_none(spec.sender(tr.tag, n), n);
      if (snd < 0 || snd != tr.rank) return false;
      const ProcState& sp = s.procs[snd];
      return sender_may_transfer(sp) && sp.env.count(bs->second) > 0;
    }
    case Rule::FreeBuffer: {
      if (!s.msg_buf.count(tr.tag)) return false;
      int snd = rank_or_none(spec.sender(tr.tag, n), n);
      int rcv = rank_or_none(spec.receiver(tr.tag, n), n);
      return snd >= 0 && rcv >= 0 && s.procs[snd].last_tag >= tr.tag &&
             s.procs[rcv].last_tag >= tr.tag;
    }
    case Rule::Barrier: {
      if (n == 0) return false;
      for (const auto& p : s.procs) {
        if (terminated(p) || head_command(*p.cmd).kind != Command::Kind::Barrier)
          return false;
      }
      return true;
    }
  }
  return false;
}

GlobalState apply_transition(const GlobalState& s, const Transition& tr,
                             const TopologySpec& spec) {
  if (!transition_enabled(s, tr, spec)) {
    throw TransitionNotEnabled("transition not enabled: " + transition_to_string(tr));
  }
  GlobalState next = s;
  switch (tr.rule) {
    case Rule::IfTrue:
    case Rule::IfFalse:
    case Rule::While:
    case Rule::Set:
    case Rule::SeqSkip: {
      auto step = local_step(s.procs[tr.rank]);
      next.procs[tr.rank] = std::move(step->next);
      break;
    }
    case Rule::Send: {
      ProcState& p = next.procs[tr.rank];
      next.send_buf.insert_or_assign(tr.tag, head_command(*p.cmd).var);
      p.cmd = consume_head(p.cmd);
      break;
    }
    case Rule::Recv: {
      ProcState& p = next.procs[tr.rank];
      next.recv_buf.insert_or_assign(tr.tag, head_command(*p.cmd).var);
      p.cmd = consume_head(p.cmd);
      break;
    }
    case Rule::WaitRecv: {
      ProcState& p = next.procs[tr.rank];
      p.env[next.recv_buf.at(tr.tag)] = next.msg_buf.at(tr.tag);
      p.last_tag = tr.tag;
      p.cmd = consume_head(p.cmd);
      next.recv_buf.erase(tr.tag);
      break;
    }
    case Rule::WaitSend: {
      ProcState& p = next.procs[tr.rank];
      p.last_tag = tr.tag;
      p.cmd = consume_head(p.cmd);
      next.send_buf.erase(tr.tag);
      break;
    }
    case Rule::TransferOnWait:
    case Rule::TransferNoWait: {
      const int n = static_cast<int>(s.procs.size());
      int snd = static_cast<int>(spec.sender(tr.tag, n));
      const std::string& x = s.send_buf.at(tr.tag);
      next.msg_buf.insert_or_assign(tr.tag, s.procs[snd].env.at(x));
      break;
    }
    case Rule::FreeBuffer:
      next.msg_buf.erase(tr.tag);
      break;
    case Rule::Barrier: {
      for (ProcState& p : next.procs) {
        p.cmd = consume_head(p.cmd);
        p.barriers_passed += 1;
      }
      break;
    }
  }
  return next;
}

ProcClass classify_proc(const GlobalState& s, int rank, const TopologySpec& spec) {
  const int n = static_cast<int>(s.procs.size());
  const ProcState& p = s.procs[rank];
  if (terminated(p)) return ProcClass::Terminated;
  const Command& h = head_command(*p.cmd);
  if (h.kind == Command::Kind::Barrier) return ProcClass::OnBarrier;
  if (h.kind != Command::Kind::Wait) return ProcClass::Running;

  Tag t = eval_expr(h.expr, p.env);
  bool in_bm = s.msg_buf.count(t) > 0;
  bool in_bs = s.send_buf.count(t) > 0;
  if (rank_or_none(spec.sender(t, n), n) == rank && !in_bm) return ProcClass::OnSend;
  if (rank_or_none(spec.receiver(t, n), n) == rank && !in_bm && !in_bs)
    return ProcClass::OnRecv;
  for (Rule r : {Rule::WaitRecv, Rule::WaitSend, Rule::TransferOnWait}) {
    if (transition_enabled(s, {r, rank, t}, spec)) return ProcClass::Running;
  }
  return ProcClass::Unclassified;
}

bool is_deadlock(const GlobalState& s, const TopologySpec& spec) {
  const int n = static_cast<int>(s.procs.size());
  int on_barrier = 0, done = 0;
  for (int i = 0; i < n; ++i) {
    switch (classify_proc(s, i, spec)) {
      case ProcClass::OnSend:
      case ProcClass::OnRecv:
        break;
      case ProcClass::OnBarrier:
        ++on_barrier;
        break;
      case ProcClass::Terminated:
        ++done;
        break;
      default:
        return false;
    }
  }
  return done != n && on_barrier != n;
}

bool is_stuck(const GlobalState& s, const TopologySpec& spec) {
  if (is_terminated(s)) return false;
  for (const Transition& t : enabled_transitions(s, spec)) {
    if (t.rule != Rule::FreeBuffer) return false;
  }
  return true;
}

bool is_terminated(const GlobalState& s) {
  for (const auto& p : s.procs) {
    if (p.cmd->kind != Command::Kind::Skip) return false;
  }
  return true;
}

GlobalState replay_trace(const Trace& trace, const TopologySpec& spec,
                         const std::function<void(const GlobalState&, std::size_t)>& on_state) {
  GlobalState s = trace.initial;
  if (on_state) on_state(s, 0);
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const Transition& tr = trace.steps[k];
    if (!transition_enabled(s, tr, spec)) {
      throw ReplayError("trace step " + std::to_string(k) + " not enabled: " +
                        transition_to_string(tr));
    }
    s = apply_transition(s, tr, spec);
    if (on_state) on_state(s, k + 1);
  }
  return s;
}

}  // namespace mpicheck
