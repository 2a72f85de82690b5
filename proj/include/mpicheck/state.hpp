#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpicheck/command.hpp"

namespace mpicheck {

/// One process of the machine: remaining command, variable environment,
/// largest tag completed by a wait (starts at -1), and barriers passed.
struct ProcState {
  CommandPtr cmd;
  Env env;
  std::int64_t last_tag = -1;
  std::int64_t barriers_passed = 0;
};

/// The whole machine: per-rank processes plus the three shared buffers.
/// recv_buf/send_buf map tags to destination/source variable names; msg_buf
/// holds transferred payloads.
struct GlobalState {
  std::vector<ProcState> procs;
  std::map<std::int64_t, std::string> recv_buf;  // B_r
  std::map<std::int64_t, std::string> send_buf;  // B_s
  std::map<std::int64_t, std::int64_t> msg_buf;  // B_m
};

bool proc_equal(const ProcState& a, const ProcState& b);
bool state_equal(const GlobalState& a, const GlobalState& b);

/// SIMD launch: every rank runs Seq(program, Barrier) with env
/// {rank -> i, size -> n}, last_tag -1, no barriers passed, empty buffers.
/// Requires n >= 2.
GlobalState initial_state(const CommandPtr& program, int n);

/// Multi-line box rendering of a state, one line per process plus the three
/// buffers; `title` defaults to nothing.
std::string state_to_box(const GlobalState& s, const std::string& title = "");

}  // namespace mpicheck
