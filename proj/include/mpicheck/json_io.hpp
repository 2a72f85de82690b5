#pragma once

#include <json.hpp>

#include "mpicheck/explorer.hpp"
#include "mpicheck/monitor.hpp"
#include "mpicheck/semantics.hpp"
#include "mpicheck/topology.hpp"

namespace mpicheck {

using nlohmann::json;

class JsonError : public std::runtime_error {
 public:
  explicit JsonError(const std::string& what) : std::runtime_error(what) {}
};

/// Topology spec in expression form, as read from a spec document. The five
/// functions are expressions over free variables: sender/receiver/message
/// over {tag, size}; barrier_tag over {index, size}; barrier_count over
/// {size}.
struct ExprTopology {
  ExprPtr sender, receiver, message, barrier_tag, barrier_count;
  std::map<std::int64_t, CollectiveSpec> collectives;

  TopologySpec compile() const;
};

json expr_to_json(const Expr& e);
ExprPtr expr_from_json(const json& j);

json command_to_json(const Command& c);
CommandPtr command_from_json(const json& j);

json spec_to_json(const ExprTopology& spec);
ExprTopology spec_from_json(const json& j);

json transition_to_json(const Transition& t);
Transition transition_from_json(const json& j);

json violation_to_json(const Violation& v);

/// Trace document: {"n": N, "program": <command>, "steps": [<transition>]}.
/// The initial state is reconstructed with initial_state(program, n).
struct TraceFile {
  int n = 0;
  CommandPtr program;
  std::vector<Transition> steps;

  Trace to_trace() const;
};

json trace_to_json(const TraceFile& t);
TraceFile trace_from_json(const json& j);

json verdict_to_json(const Verdict& v);

/// Loads a program document: either a bare command or {"program": <command>}.
CommandPtr load_program_file(const std::string& path);
ExprTopology load_spec_file(const std::string& path);
TraceFile load_trace_file(const std::string& path);

json parse_json_file(const std::string& path);

}  // namespace mpicheck
