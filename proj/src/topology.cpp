#include "mpicheck/topology.hpp"

#include <utility>

namespace mpicheck {

std::string spec_error_to_string(const SpecError& e) {
  std::string head;
  switch (e.code) {
    case SpecError::Code::BarrierBaseNonZero: head = "BarrierBaseNonZero"; break;
    case SpecError::Code::BarrierNotMonotone: head = "BarrierNotMonotone"; break;
    case SpecError::Code::TagGapExceeded: head = "TagGapExceeded"; break;
    case SpecError::Code::RankOutOfRange: head = "RankOutOfRange"; break;
    case SpecError::Code::NegativeBarrierCount: head = "NegativeBarrierCount"; break;
    case SpecError::Code::EvalFailure: head = "EvalFailure"; break;
    case SpecError::Code::SelfSend: head = "SelfSend"; break;
  }
  std::string s = head + " (N=" + std::to_string(e.n);
  if (e.tag >= 0) s += ", tag=" + std::to_string(e.tag);
  if (e.barrier_index >= 0) s += ", barrier=" + std::to_string(e.barrier_index);
  s += ")";
  if (!e.detail.empty()) s += ": " + e.detail;
  if (e.warning) s += " [warning]";
  return s;
}

bool has_errors(const std::vector<SpecError>& errors) {
  for (const auto& e : errors) {
    if (!e.warning) return true;
  }
  return false;
}

std::vector<SpecError> validate_topology(const TopologySpec& spec, int n_lo, int n_hi) {
  std::vector<SpecError> out;
  auto err = [&](SpecError::Code code, int n, std::int64_t tag, std::int64_t bidx,
                 std::string detail, bool warning = false) {
    out.push_back(SpecError{code, n, tag, bidx, warning, std::move(detail)});
  };

  for (int n = n_lo; n <= n_hi; ++n) {
    std::int64_t count = 0;
    try {
      count = spec.barrier_count(n);
    } catch (const std::exception& ex) {
      err(SpecError::Code::EvalFailure, n, -1, -1, ex.what());
      continue;
    }
    if (count < 0) {
      err(SpecError::Code::NegativeBarrierCount, n, -1, -1,
          "barrier_count = " + std::to_string(count));
      continue;
    }

    bool barriers_ok = true;
    std::int64_t prev = 0;
    for (std::int64_t b = 0; b <= count; ++b) {
      std::int64_t bt = 0;
      try {
        bt = spec.barrier_tag(b, n);
      } catch (const std::exception& ex) {
        err(SpecError::Code::EvalFailure, n, -1, b, ex.what());
        barriers_ok = false;
        break;
      }
      if (b == 0) {
        if (bt != 0) {
          err(SpecError::Code::BarrierBaseNonZero, n, bt, 0,
              "barrier_tag(0) = " + std::to_string(bt));
          barriers_ok = false;
          break;
        }
      } else {
        // Strictly increasing between collectives; the last index may
        // plateau, since no messages can follow the final barrier.
        bool strict_needed = b < count;
        if (bt < prev || (strict_needed && bt == prev)) {
          err(SpecError::Code::BarrierNotMonotone, n, bt, b,
              "barrier_tag(" + std::to_string(b) + ") = " + std::to_string(bt) +
                  (bt < prev ? " < " : " = ") + "barrier_tag(" + std::to_string(b - 1) +
                  ") = " + std::to_string(prev));
          barriers_ok = false;
          break;
        }
        if (bt - prev > kMaxBarrierTagGap) {
          err(SpecError::Code::TagGapExceeded, n, bt, b,
              "gap " + std::to_string(bt - prev) + " > " +
                  std::to_string(kMaxBarrierTagGap));
        }
      }
      prev = bt;
    }
    if (!barriers_ok) continue;

    // Every tag below the final barrier bound must have in-range endpoints.
    std::int64_t top = prev;
    for (Tag v = 0; v < top; ++v) {
      std::int64_t s = 0, r = 0;
      try {
        s = spec.sender(v, n);
        r = spec.receiver(v, n);
      } catch (const std::exception& ex) {
        err(SpecError::Code::EvalFailure, n, v, -1, ex.what());
        continue;
      }
      if (s < 0 || s >= n) {
        err(SpecError::Code::RankOutOfRange, n, v, -1,
            "sender(" + std::to_string(v) + ") = " + std::to_string(s));
      }
      if (r < 0 || r >= n) {
        err(SpecError::Code::RankOutOfRange, n, v, -1,
            "receiver(" + std::to_string(v) + ") = " + std::to_string(r));
      }
      if (s == r && s >= 0 && s < n) {
        err(SpecError::Code::SelfSend, n, v, -1,
            "sender(" + std::to_string(v) + ") = receiver = " + std::to_string(s),
            /*warning=*/true);
      }
    }
  }
  return out;
}

TopologySpec make_expr_topology(ExprPtr sender, ExprPtr receiver, ExprPtr message,
                                ExprPtr barrier_tag, ExprPtr barrier_count,
                                std::map<std::int64_t, CollectiveSpec> collectives) {
  TopologySpec spec;
  auto tag_fn = [](ExprPtr e) {
    return [e = std::move(e)](Tag tag, int n) {
      Env env{{"tag", tag}, {"size", n}};
      return eval_expr(e, env);
    };
  };
  spec.sender = tag_fn(std::move(sender));
  spec.receiver = tag_fn(std::move(receiver));
  spec.message = tag_fn(std::move(message));
  spec.barrier_tag = [e = std::move(barrier_tag)](std::int64_t index, int n) {
    Env env{{"index", index}, {"size", n}};
    return eval_expr(e, env);
  };
  spec.barrier_count = [e = std::move(barrier_count)](int n) {
    Env env{{"size", n}};
    return eval_expr(e, env);
  };
  spec.collectives = std::move(collectives);
  return spec;
}

}  // namespace mpicheck
