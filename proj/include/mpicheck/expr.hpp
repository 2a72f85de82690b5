#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "mpicheck/sha256.hpp"

namespace mpicheck {

/// Per-process variable environment. Always binds "rank" and "size".
using Env = std::map<std::string, std::int64_t>;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Integer expression tree: literals, variables, equality test, and
/// arithmetic. Division is integer division and divisor zero is an error,
/// never a value.
struct Expr {
  enum class Kind { IntLit, Var, Eq, Add, Neg, Mul, Div };

  Kind kind;
  std::int64_t value = 0;  // IntLit
  std::string name;        // Var
  ExprPtr lhs, rhs;        // binary nodes; Neg uses lhs only
  // Merkle digest of the subtree, filled in by the factories; lets states
  // hash without re-serializing shared subtrees.
  Digest digest;
};

ExprPtr lit(std::int64_t n);
ExprPtr var(std::string name);
ExprPtr eq(ExprPtr a, ExprPtr b);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr e);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr divide(ExprPtr a, ExprPtr b);

/// `a - b`, as sugar for a + (-b).
ExprPtr sub(ExprPtr a, ExprPtr b);

class EvalError : public std::runtime_error {
 public:
  enum class Kind { UnboundVariable, DivisionByZero };

  EvalError(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Big-step evaluation. Eq yields 1 or 0; Add/Mul/Neg wrap in two's
/// complement. Throws EvalError for unbound variables and division by zero.
std::int64_t eval_expr(const Expr& e, const Env& env);
std::int64_t eval_expr(const ExprPtr& e, const Env& env);

bool expr_equal(const Expr& a, const Expr& b);
bool expr_equal(const ExprPtr& a, const ExprPtr& b);

std::string expr_to_string(const Expr& e);
std::string expr_to_string(const ExprPtr& e);

}  // namespace mpicheck
