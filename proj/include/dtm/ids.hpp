#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

namespace dtm {

/// Strongly typed dense identifier. Values double as indices into the owning
/// container, so ids of a given kind always run 0..n-1.
template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  constexpr std::size_t index() const { return value; }
  constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

using NodeId = Id<struct NodeTag>;
using EdgeId = Id<struct EdgeTag>;
using VehicleId = Id<struct VehicleTag>;

/// Simulation time in whole ticks.
using Tick = std::int64_t;

}  // namespace dtm

template <class Tag>
struct std::hash<dtm::Id<Tag>> {
  std::size_t operator()(dtm::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
