#pragma once

#include <initializer_list>
#include <vector>

#include "mpicheck/expr.hpp"

namespace mpicheck {

struct Command;
using CommandPtr = std::shared_ptr<const Command>;

/// A command of the message-passing calculus. A process whose command is a
/// lone Skip has terminated; no rule applies to it.
struct Command {
  enum class Kind { IRecv, ISend, Wait, Barrier, Skip, If, While, Set, Seq };

  Kind kind;
  ExprPtr expr;     // tag (IRecv/ISend/Wait), guard (If/While), rhs (Set)
  std::string var;  // dst (IRecv), src (ISend), target (Set)
  CommandPtr a, b;  // If: then/else; While: body in a; Seq: first/rest
  // Merkle digest of the subtree, filled in by the factories.
  Digest digest;
};

CommandPtr cmd_skip();
CommandPtr cmd_barrier();
CommandPtr cmd_irecv(ExprPtr tag, std::string dst);
CommandPtr cmd_isend(ExprPtr tag, std::string src);
CommandPtr cmd_wait(ExprPtr tag);
CommandPtr cmd_if(ExprPtr cond, CommandPtr then_c, CommandPtr else_c);
CommandPtr cmd_while(ExprPtr cond, CommandPtr body);
CommandPtr cmd_set(std::string x, ExprPtr e);
CommandPtr cmd_seq(CommandPtr first, CommandPtr rest);

/// Right-associated sequence of two or more commands.
CommandPtr cmd_seq(std::vector<CommandPtr> cmds);

/// Leftmost non-Seq command of the Seq spine: the command the next step
/// would execute.
const Command& head_command(const Command& c);

/// Rewrites the head command to Skip, preserving the Seq spine. Used by the
/// global rules, which consume the head (isend/irecv/wait/barrier -> skip).
CommandPtr consume_head(const CommandPtr& c);

/// True iff the rightmost leaf of the Seq spine is a Barrier, i.e. the
/// process still has its final barrier ahead.
bool ends_in_barrier(const Command& c);

bool command_equal(const Command& a, const Command& b);
bool command_equal(const CommandPtr& a, const CommandPtr& b);

std::string command_to_string(const Command& c);

/// Head command plus "; .." when a continuation follows; mirrors the
/// truncated per-process lines of the state box display.
std::string command_head_string(const Command& c);

}  // namespace mpicheck
