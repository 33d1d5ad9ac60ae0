#pragma once

namespace tcat::special {

// Reserved vocabulary ids, fixed across every model and data file.
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kUnk = 3;
constexpr int kCls = 4;
constexpr int kSep = 5;
constexpr int kReservedCount = 6;

}  // namespace tcat::special
