#include "mpicheck/json_io.hpp"

#include <fstream>

namespace mpicheck {

TopologySpec ExprTopology::compile() const {
  return make_expr_topology(sender, receiver, message, barrier_tag, barrier_count,
                            collectives);
}

json expr_to_json(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return e.value;
    case Expr::Kind::Var:
      return e.name;
    case Expr::Kind::Eq:
      return json{{"op", "eq"}, {"lhs", expr_to_json(*e.lhs)}, {"rhs", expr_to_json(*e.rhs)}};
    case Expr::Kind::Add:
      return json{{"op", "add"}, {"lhs", expr_to_json(*e.lhs)}, {"rhs", expr_to_json(*e.rhs)}};
    case Expr::Kind::Neg:
      return json{{"op", "neg"}, {"e", expr_to_json(*e.lhs)}};
    case Expr::Kind::Mul:
      return json{{"op", "mul"}, {"lhs", expr_to_json(*e.lhs)}, {"rhs", expr_to_json(*e.rhs)}};
    case Expr::Kind::Div:
      return json{{"op", "div"}, {"lhs", expr_to_json(*e.lhs)}, {"rhs", expr_to_json(*e.rhs)}};
  }
  throw JsonError("unreachable expression kind");
}

ExprPtr expr_from_json(const json& j) {
  if (j.is_number_integer()) return lit(j.get<std::int64_t>());
  if (j.is_string()) return var(j.get<std::string>());
  if (!j.is_object() || !j.contains("op")) {
    throw JsonError("expression must be an integer, a variable name, or an {op,...} object: " +
                    j.dump());
  }
  const std::string op = j.at("op").get<std::string>();
  if (op == "neg") return neg(expr_from_json(j.at("e")));
  if (op != "eq" && op != "add" && op != "sub" && op != "mul" && op != "div") {
    throw JsonError("unknown expression op '" + op + "'");
  }
  ExprPtr a = expr_from_json(j.at("lhs"));
  ExprPtr b = expr_from_json(j.at("rhs"));
  if (op == "eq") return eq(a, b);
  if (op == "add") return add(a, b);
  if (op == "sub") return sub(a, b);
  if (op == "mul") return mul(a, b);
  return divide(a, b);
}

json command_to_json(const Command& c) {
  switch (c.kind) {
    case Command::Kind::Skip:
      return json{{"cmd", "skip"}};
    case Command::Kind::Barrier:
      return json{{"cmd", "barrier"}};
    case Command::Kind::IRecv:
      return json{{"cmd", "irecv"}, {"tag", expr_to_json(*c.expr)}, {"dst", c.var}};
    case Command::Kind::ISend:
      return json{{"cmd", "isend"}, {"tag", expr_to_json(*c.expr)}, {"src", c.var}};
    case Command::Kind::Wait:
      return json{{"cmd", "wait"}, {"tag", expr_to_json(*c.expr)}};
    case Command::Kind::If:
      return json{{"cmd", "if"},
                  {"cond", expr_to_json(*c.expr)},
                  {"then", command_to_json(*c.a)},
                  {"else", command_to_json(*c.b)}};
    case Command::Kind::While:
      return json{{"cmd", "while"}, {"cond", expr_to_json(*c.expr)}, {"body", command_to_json(*c.a)}};
    case Command::Kind::Set:
      return json{{"cmd", "set"}, {"var", c.var}, {"expr", expr_to_json(*c.expr)}};
    case Command::Kind::Seq: {
      // Flatten the spine into a list for readability.
      json cmds = json::array();
      const Command* cur = &c;
      while (cur->kind == Command::Kind::Seq) {
        cmds.push_back(command_to_json(*cur->a));
        cur = cur->b.get();
      }
      cmds.push_back(command_to_json(*cur));
      return json{{"cmd", "seq"}, {"cmds", std::move(cmds)}};
    }
  }
  throw JsonError("unreachable command kind");
}

CommandPtr command_from_json(const json& j) {
  if (!j.is_object() || !j.contains("cmd")) {
    throw JsonError("command must be a {cmd,...} object: " + j.dump());
  }
  const std::string op = j.at("cmd").get<std::string>();
  if (op == "skip") return cmd_skip();
  if (op == "barrier") return cmd_barrier();
  if (op == "irecv") return cmd_irecv(expr_from_json(j.at("tag")), j.at("dst").get<std::string>());
  if (op == "isend") return cmd_isend(expr_from_json(j.at("tag")), j.at("src").get<std::string>());
  if (op == "wait") return cmd_wait(expr_from_json(j.at("tag")));
  if (op == "if") {
    CommandPtr else_c = j.contains("else") ? command_from_json(j.at("else")) : cmd_skip();
    return cmd_if(expr_from_json(j.at("cond")), command_from_json(j.at("then")), else_c);
  }
  if (op == "while") return cmd_while(expr_from_json(j.at("cond")), command_from_json(j.at("body")));
  if (op == "set") return cmd_set(j.at("var").get<std::string>(), expr_from_json(j.at("expr")));
  if (op == "seq") {
    std::vector<CommandPtr> cmds;
    for (const json& c : j.at("cmds")) cmds.push_back(command_from_json(c));
    if (cmds.empty()) throw JsonError("seq needs at least one command");
    return cmd_seq(std::move(cmds));
  }
  throw JsonError("unknown command '" + op + "'");
}

namespace {

const char* reduce_op_name(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return "sum";
    case ReduceOp::Min: return "min";
    case ReduceOp::Max: return "max";
    case ReduceOp::LogicalAnd: return "and";
  }
  return "?";
}

ReduceOp reduce_op_from_name(const std::string& s) {
  if (s == "sum") return ReduceOp::Sum;
  if (s == "min") return ReduceOp::Min;
  if (s == "max") return ReduceOp::Max;
  if (s == "and") return ReduceOp::LogicalAnd;
  throw JsonError("unknown reduce op '" + s + "'");
}

}  // namespace

json spec_to_json(const ExprTopology& spec) {
  json collectives = json::array();
  for (const auto& [index, c] : spec.collectives) {
    json jc{{"index", index}};
    switch (c.kind) {
      case CollectiveSpec::Kind::Barrier:
        jc["kind"] = "barrier";
        break;
      case CollectiveSpec::Kind::Gather:
        jc["kind"] = "gather";
        jc["root"] = c.root;
        break;
      case CollectiveSpec::Kind::AllReduce:
        jc["kind"] = "allreduce";
        jc["op"] = reduce_op_name(c.op);
        break;
    }
    collectives.push_back(std::move(jc));
  }
  return json{{"sender", expr_to_json(*spec.sender)},
              {"receiver", expr_to_json(*spec.receiver)},
              {"message", expr_to_json(*spec.message)},
              {"barrier_tag", expr_to_json(*spec.barrier_tag)},
              {"barrier_count", expr_to_json(*spec.barrier_count)},
              {"collectives", std::move(collectives)}};
}

ExprTopology spec_from_json(const json& j) {
  ExprTopology spec;
  spec.sender = expr_from_json(j.at("sender"));
  spec.receiver = expr_from_json(j.at("receiver"));
  spec.message = expr_from_json(j.at("message"));
  spec.barrier_tag = expr_from_json(j.at("barrier_tag"));
  spec.barrier_count = expr_from_json(j.at("barrier_count"));
  if (j.contains("collectives")) {
    for (const json& jc : j.at("collectives")) {
      CollectiveSpec c;
      const std::string kind = jc.at("kind").get<std::string>();
      if (kind == "barrier") {
        c.kind = CollectiveSpec::Kind::Barrier;
      } else if (kind == "gather") {
        c.kind = CollectiveSpec::Kind::Gather;
        c.root = jc.value("root", 0);
      } else if (kind == "allreduce") {
        c.kind = CollectiveSpec::Kind::AllReduce;
        c.op = reduce_op_from_name(jc.value("op", "sum"));
      } else {
        throw JsonError("unknown collective kind '" + kind + "'");
      }
      spec.collectives.emplace(jc.at("index").get<std::int64_t>(), c);
    }
  }
  return spec;
}

json transition_to_json(const Transition& t) {
  return json{{"rule", rule_name(t.rule)}, {"rank", t.rank}, {"tag", t.tag}};
}

Transition transition_from_json(const json& j) {
  auto rule = rule_from_name(j.at("rule").get<std::string>());
  if (!rule) throw JsonError("unknown rule '" + j.at("rule").get<std::string>() + "'");
  Transition t;
  t.rule = *rule;
  t.rank = j.value("rank", -1);
  t.tag = j.value("tag", std::int64_t{-1});
  return t;
}

json violation_to_json(const Violation& v) {
  return json{{"axiom", axiom_name(v.axiom)}, {"rank", v.rank},     {"tag", v.tag},
              {"clause", v.clause},           {"detail", v.detail}, {"state_index", v.state_index}};
}

Trace TraceFile::to_trace() const { return Trace{initial_state(program, n), steps}; }

json trace_to_json(const TraceFile& t) {
  json steps = json::array();
  for (const Transition& tr : t.steps) steps.push_back(transition_to_json(tr));
  return json{{"n", t.n}, {"program", command_to_json(*t.program)}, {"steps", std::move(steps)}};
}

TraceFile trace_from_json(const json& j) {
  TraceFile t;
  t.n = j.at("n").get<int>();
  t.program = command_from_json(j.at("program"));
  for (const json& s : j.at("steps")) t.steps.push_back(transition_from_json(s));
  return t;
}

json verdict_to_json(const Verdict& v) {
  json out;
  if (const auto* ok = std::get_if<VerdictOk>(&v)) {
    out["verdict"] = "ok";
    out["states_visited"] = ok->states_visited;
    out["terminal_states"] = ok->terminal_states;
  } else if (const auto* dl = std::get_if<VerdictDeadlock>(&v)) {
    out["verdict"] = "deadlock";
    json steps = json::array();
    for (const Transition& tr : dl->trace.steps) steps.push_back(transition_to_json(tr));
    out["trace"] = std::move(steps);
  } else if (const auto* vi = std::get_if<VerdictViolation>(&v)) {
    out["verdict"] = "violation";
    json steps = json::array();
    for (const Transition& tr : vi->trace.steps) steps.push_back(transition_to_json(tr));
    out["trace"] = std::move(steps);
    json viols = json::array();
    for (const Violation& viol : vi->violations) viols.push_back(violation_to_json(viol));
    out["violations"] = std::move(viols);
  } else if (const auto* b = std::get_if<VerdictBound>(&v)) {
    out["verdict"] = "bound_exceeded";
    out["states_visited"] = b->states_visited;
  }
  return out;
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw JsonError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw JsonError("parse error in '" + path + "': " + e.what());
  }
}

CommandPtr load_program_file(const std::string& path) {
  json j = parse_json_file(path);
  try {
    if (j.is_object() && j.contains("program")) return command_from_json(j.at("program"));
    return command_from_json(j);
  } catch (const json::exception& e) {
    throw JsonError("bad program document '" + path + "': " + e.what());
  }
}

ExprTopology load_spec_file(const std::string& path) {
  json j = parse_json_file(path);
  try {
    if (j.is_object() && j.contains("spec")) return spec_from_json(j.at("spec"));
    return spec_from_json(j);
  } catch (const json::exception& e) {
    throw JsonError("bad spec document '" + path + "': " + e.what());
  }
}

TraceFile load_trace_file(const std::string& path) {
  json j = parse_json_file(path);
  try {
    return trace_from_json(j);
  } catch (const json::exception& e) {
    throw JsonError("bad trace document '" + path + "': " + e.what());
  }
}

}  // namespace mpicheck
