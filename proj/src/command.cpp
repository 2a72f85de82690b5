#include "mpicheck/command.hpp"

#include <stdexcept>
#include <utility>

namespace mpicheck {

namespace {
CommandPtr make(Command c) {
  ByteSink sink;
  sink.u8(static_cast<unsigned char>(c.kind) + 0x40);
  switch (c.kind) {
    case Command::Kind::Skip:
    case Command::Kind::Barrier:
      break;
    case Command::Kind::Wait:
      sink.digest(c.expr->digest);
      break;
    case Command::Kind::IRecv:
    case Command::Kind::ISend:
    case Command::Kind::Set:
      sink.str(c.var);
      sink.digest(c.expr->digest);
      break;
    case Command::Kind::If:
      sink.digest(c.expr->digest);
      sink.digest(c.a->digest);
      sink.digest(c.b->digest);
      break;
    case Command::Kind::While:
      sink.digest(c.expr->digest);
      sink.digest(c.a->digest);
      break;
    case Command::Kind::Seq:
      sink.digest(c.a->digest);
      sink.digest(c.b->digest);
      break;
  }
  c.digest = sink.sha();
  return std::make_shared<const Command>(std::move(c));
}
}  // namespace

CommandPtr cmd_skip() {
  static const CommandPtr skip = [] {
    Command c;
    c.kind = Command::Kind::Skip;
    return make(std::move(c));
  }();
  return skip;
}

CommandPtr cmd_barrier() {
  static const CommandPtr barrier = [] {
    Command c;
    c.kind = Command::Kind::Barrier;
    return make(std::move(c));
  }();
  return barrier;
}

CommandPtr cmd_irecv(ExprPtr tag, std::string dst) {
  Command c;
  c.kind = Command::Kind::IRecv;
  c.expr = std::move(tag);
  c.var = std::move(dst);
  return make(std::move(c));
}

CommandPtr cmd_isend(ExprPtr tag, std::string src) {
  Command c;
  c.kind = Command::Kind::ISend;
  c.expr = std::move(tag);
  c.var = std::move(src);
  return make(std::move(c));
}

CommandPtr cmd_wait(ExprPtr tag) {
  Command c;
  c.kind = Command::Kind::Wait;
  c.expr = std::move(tag);
  return make(std::move(c));
}

CommandPtr cmd_if(ExprPtr cond, CommandPtr then_c, CommandPtr else_c) {
  Command c;
  c.kind = Command::Kind::If;
  c.expr = std::move(cond);
  c.a = std::move(then_c);
  c.b = std::move(else_c);
  return make(std::move(c));
}

CommandPtr cmd_while(ExprPtr cond, CommandPtr body) {
  Command c;
  c.kind = Command::Kind::While;
  c.expr = std::move(cond);
  c.a = std::move(body);
  return make(std::move(c));
}

CommandPtr cmd_set(std::string x, ExprPtr e) {
  Command c;
  c.kind = Command::Kind::Set;
  c.expr = std::move(e);
  c.var = std::move(x);
  return make(std::move(c));
}

CommandPtr cmd_seq(CommandPtr first, CommandPtr rest) {
  Command c;
  c.kind = Command::Kind::Seq;
  c.a = std::move(first);
  c.b = std::move(rest);
  return make(std::move(c));
}

CommandPtr cmd_seq(std::vector<CommandPtr> cmds) {
  if (cmds.empty()) return cmd_skip();
  CommandPtr out = cmds.back();
  for (auto it = cmds.rbegin() + 1; it != cmds.rend(); ++it) {
    out = cmd_seq(*it, std::move(out));
  }
  return out;
}

const Command& head_command(const Command& c) {
  const Command* cur = &c;
  while (cur->kind == Command::Kind::Seq) cur = cur->a.get();
  return *cur;
}

CommandPtr consume_head(const CommandPtr& c) {
  if (c->kind == Command::Kind::Seq) return cmd_seq(consume_head(c->a), c->b);
  return cmd_skip();
}

bool ends_in_barrier(const Command& c) {
  const Command* cur = &c;
  while (cur->kind == Command::Kind::Seq) cur = cur->b.get();
  return cur->kind == Command::Kind::Barrier;
}

bool command_equal(const Command& a, const Command& b) {
  if (&a == &b) return true;
  return a.digest == b.digest;
}

bool command_equal(const CommandPtr& a, const CommandPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return command_equal(*a, *b);
}

std::string command_to_string(const Command& c) {
  switch (c.kind) {
    case Command::Kind::Skip:
      return "skip";
    case Command::Kind::Barrier:
      return "barrier";
    case Command::Kind::IRecv:
      return "irecv " + expr_to_string(c.expr) + " " + c.var;
    case Command::Kind::ISend:
      return "isend " + expr_to_string(c.expr) + " " + c.var;
    case Command::Kind::Wait:
      return "wait " + expr_to_string(c.expr);
    case Command::Kind::If:
      return "if (" + expr_to_string(c.expr) + ") { " + command_to_string(*c.a) +
             " } else { " + command_to_string(*c.b) + " }";
    case Command::Kind::While:
      return "while (" + expr_to_string(c.expr) + ") { " + command_to_string(*c.a) + " }";
    case Command::Kind::Set:
      return "set " + c.var + " " + expr_to_string(c.expr);
    case Command::Kind::Seq:
      return command_to_string(*c.a) + "; " + command_to_string(*c.b);
  }
  return "?";
}

std::string command_head_string(const Command& c) {
  const Command& h = head_command(c);
  std::string s;
  switch (h.kind) {
    case Command::Kind::If:
      s = "if (" + expr_to_string(h.expr) + ") ...";
      break;
    case Command::Kind::While:
      s = "while (" + expr_to_string(h.expr) + ") ...";
      break;
    default:
      s = command_to_string(h);
  }
  if (&h != &c) s += "; ..";
  return s;
}

}  // namespace mpicheck
