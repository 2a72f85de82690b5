#include "mpicheck/expr.hpp"

#include <utility>

namespace mpicheck {

namespace {

ExprPtr make(Expr e) {
  ByteSink sink;
  sink.u8(static_cast<unsigned char>(e.kind));
  switch (e.kind) {
    case Expr::Kind::IntLit:
      sink.i64(e.value);
      break;
    case Expr::Kind::Var:
      sink.str(e.name);
      break;
    case Expr::Kind::Neg:
      sink.digest(e.lhs->digest);
      break;
    default:
      sink.digest(e.lhs->digest);
      sink.digest(e.rhs->digest);
  }
  e.digest = sink.sha();
  return std::make_shared<const Expr>(std::move(e));
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                   static_cast<std::uint64_t>(b));
}

std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                   static_cast<std::uint64_t>(b));
}

std::int64_t wrap_neg(std::int64_t a) {
  return static_cast<std::int64_t>(0 - static_cast<std::uint64_t>(a));
}

}  // namespace

ExprPtr lit(std::int64_t n) {
  Expr e;
  e.kind = Expr::Kind::IntLit;
  e.value = n;
  return make(std::move(e));
}

ExprPtr var(std::string name) {
  Expr e;
  e.kind = Expr::Kind::Var;
  e.name = std::move(name);
  return make(std::move(e));
}

namespace {
ExprPtr binary(Expr::Kind kind, ExprPtr a, ExprPtr b) {
  Expr e;
  e.kind = kind;
  e.lhs = std::move(a);
  e.rhs = std::move(b);
  return make(std::move(e));
}
}  // namespace

ExprPtr eq(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Eq, std::move(a), std::move(b)); }
ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Add, std::move(a), std::move(b)); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Mul, std::move(a), std::move(b)); }
ExprPtr divide(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Div, std::move(a), std::move(b)); }

ExprPtr neg(ExprPtr e) {
  Expr n;
  n.kind = Expr::Kind::Neg;
  n.lhs = std::move(e);
  return make(std::move(n));
}

ExprPtr sub(ExprPtr a, ExprPtr b) { return add(std::move(a), neg(std::move(b))); }

std::int64_t eval_expr(const Expr& e, const Env& env) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return e.value;
    case Expr::Kind::Var: {
      auto it = env.find(e.name);
      if (it == env.end()) {
        throw EvalError(EvalError::Kind::UnboundVariable,
                        "unbound variable '" + e.name + "'");
      }
      return it->second;
    }
    case Expr::Kind::Eq:
      return eval_expr(*e.lhs, env) == eval_expr(*e.rhs, env) ? 1 : 0;
    case Expr::Kind::Add:
      return wrap_add(eval_expr(*e.lhs, env), eval_expr(*e.rhs, env));
    case Expr::Kind::Neg:
      return wrap_neg(eval_expr(*e.lhs, env));
    case Expr::Kind::Mul:
      return wrap_mul(eval_expr(*e.lhs, env), eval_expr(*e.rhs, env));
    case Expr::Kind::Div: {
      std::int64_t a = eval_expr(*e.lhs, env);
      std::int64_t b = eval_expr(*e.rhs, env);
      if (b == 0) {
        throw EvalError(EvalError::Kind::DivisionByZero,
                        "division by zero in '" + expr_to_string(e) + "'");
      }
      if (b == -1) return wrap_neg(a);  // INT64_MIN / -1 would overflow
      return a / b;
    }
  }
  throw std::logic_error("unreachable expression kind");
}

std::int64_t eval_expr(const ExprPtr& e, const Env& env) { return eval_expr(*e, env); }

bool expr_equal(const Expr& a, const Expr& b) {
  if (&a == &b) return true;
  return a.digest == b.digest;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return expr_equal(*a, *b);
}

namespace {
bool is_atom(const Expr& e) {
  return e.kind == Expr::Kind::IntLit || e.kind == Expr::Kind::Var;
}

std::string paren(const Expr& e) {
  std::string s = expr_to_string(e);
  if (is_atom(e)) return s;
  return "(" + s + ")";
}
}  // namespace

std::string expr_to_string(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return std::to_string(e.value);
    case Expr::Kind::Var:
      return e.name;
    case Expr::Kind::Eq:
      return paren(*e.lhs) + " = " + paren(*e.rhs);
    case Expr::Kind::Add:
      return paren(*e.lhs) + " + " + paren(*e.rhs);
    case Expr::Kind::Neg:
      return "-" + paren(*e.lhs);
    case Expr::Kind::Mul:
      return paren(*e.lhs) + " * " + paren(*e.rhs);
    case Expr::Kind::Div:
      return paren(*e.lhs) + " div " + paren(*e.rhs);
  }
  return "?";
}

std::string expr_to_string(const ExprPtr& e) { return expr_to_string(*e); }

}  // namespace mpicheck
