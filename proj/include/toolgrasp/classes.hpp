#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace toolgrasp {

// The eight work-tool classes, ids 0..7 in this order.
inline constexpr std::size_t kNumClasses = 8;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Allenkey", "Hammer", "File", "Knife", "Plier", "Scissor", "Screwdriver",
    "Wrench"};

enum ToolClass : int {
  kAllenkey = 0,
  kHammer = 1,
  kFile = 2,
  kKnife = 3,
  kPlier = 4,
  kScissor = 5,
  kScrewdriver = 6,
  kWrench = 7,
};

}  // namespace toolgrasp
