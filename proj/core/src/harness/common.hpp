#pragma once

#include <cstdint>

#include "ensers/harness.hpp"

namespace ensers::detail {

/// Decorrelated child seed for a (seed, tag) pair.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

RhsSpec rhs_spec(const SnapshotSet& data);

/// Grid points touched by a window index, with the index remapped onto them.
struct Compacted {
  IndexList index;
  Tensor coords;
};
Compacted compact(const IndexList& idx, std::size_t omega, const Tensor& coords);

void check_net(const DecoderNet& net, const SnapshotSet& data, std::size_t gamma, const char* who);

}  // namespace ensers::detail
