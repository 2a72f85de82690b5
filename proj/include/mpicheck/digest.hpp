#pragma once

#include "mpicheck/sha256.hpp"
#include "mpicheck/state.hpp"

namespace mpicheck {

/// Digest of the canonical serialization of a machine state. Equal states
/// (structural equality of all four components, maps compared
/// order-insensitively) yield equal digests; command and expression
/// subtrees contribute their cached Merkle digests.
Digest canonical_hash(const GlobalState& s);

/// Digest of a real vector over its raw 64-bit words (bitwise: two vectors
/// hash equal iff every element is bit-identical).
Digest hash_doubles(const std::vector<double>& v);

}  // namespace mpicheck
