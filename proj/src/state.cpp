#include "mpicheck/state.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mpicheck {

bool proc_equal(const ProcState& a, const ProcState& b) {
  return a.last_tag == b.last_tag && a.barriers_passed == b.barriers_passed &&
         a.env == b.env && command_equal(a.cmd, b.cmd);
}

bool state_equal(const GlobalState& a, const GlobalState& b) {
  if (a.procs.size() != b.procs.size()) return false;
  if (a.recv_buf != b.recv_buf || a.send_buf != b.send_buf || a.msg_buf != b.msg_buf)
    return false;
  for (std::size_t i = 0; i < a.procs.size(); ++i) {
    if (!proc_equal(a.procs[i], b.procs[i])) return false;
  }
  return true;
}

GlobalState initial_state(const CommandPtr& program, int n) {
  if (n < 2) {
    throw std::invalid_argument("initial_state requires at least 2 processes, got " +
                                std::to_string(n));
  }
  GlobalState s;
  s.procs.reserve(static_cast<std::size_t>(n));
  CommandPtr cmd = cmd_seq(program, cmd_barrier());
  for (int i = 0; i < n; ++i) {
    ProcState p;
    p.cmd = cmd;
    p.env = Env{{"rank", i}, {"size", n}};
    p.last_tag = -1;
    p.barriers_passed = 0;
    s.procs.push_back(std::move(p));
  }
  return s;
}

namespace {

template <typename V>
std::string map_to_string(const std::map<std::int64_t, V>& m) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const auto& [k, v] : m) {
    if (!first) os << ", ";
    first = false;
    os << k << " -> " << v;
  }
  os << "}";
  return os.str();
}

}  // namespace

std::string state_to_box(const GlobalState& s, const std::string& title) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < s.procs.size(); ++i) {
    const ProcState& p = s.procs[i];
    std::ostringstream os;
    os << "c" << i << " = " << command_head_string(*p.cmd) << "   (t=" << p.last_tag
       << ", b=" << p.barriers_passed << ")";
    lines.push_back(os.str());
  }
  lines.push_back("Br = " + map_to_string(s.recv_buf));
  lines.push_back("Bs = " + map_to_string(s.send_buf));
  lines.push_back("Bm = " + map_to_string(s.msg_buf));

  std::size_t width = title.empty() ? 0 : title.size() + 2;
  for (const auto& l : lines) width = std::max(width, l.size());

  std::ostringstream out;
  std::string head = title.empty() ? "" : "- " + title + " ";
  out << "+" << head << std::string(width + 2 - head.size(), '-') << "+\n";
  for (const auto& l : lines) {
    out << "| " << l << std::string(width - l.size(), ' ') << " |\n";
  }
  out << "+" << std::string(width + 2, '-') << "+";
  return out.str();
}

}  // namespace mpicheck
