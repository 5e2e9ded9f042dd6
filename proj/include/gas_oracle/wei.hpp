#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <type_traits>

namespace gas_oracle {

__extension__ using uint128 = unsigned __int128;

/// A gas price in wei. 128-bit so no realistic price (or sum of prices) overflows.
class Wei {
 public:
  constexpr Wei() = default;
  template <typename T>
    requires(std::is_integral_v<T> || std::is_same_v<T, uint128>)
  constexpr explicit Wei(T v) : value_(static_cast<uint128>(v)) {}

  constexpr uint128 value() const { return value_; }
  double to_double() const { return static_cast<double>(value_); }
  long double to_long_double() const { return static_cast<long double>(value_); }
  double gwei() const { return to_double() * 1e-9; }

  /// Decimal digits only; throws PreconditionError on anything else or overflow.
  static Wei parse_decimal(std::string_view text);
  /// "0x"-prefixed hex quantity as used by Ethereum JSON-RPC.
  static Wei parse_hex(std::string_view text);
  /// Smallest integer wei >= x; negative and NaN inputs map to zero.
  static Wei ceil(long double x);

  std::string to_string() const;
  std::string to_hex() const;

  constexpr auto operator<=>(const Wei&) const = default;
  constexpr bool operator==(const Wei&) const = default;

  constexpr Wei operator+(Wei o) const { return Wei(value_ + o.value_); }
  constexpr Wei operator-(Wei o) const { return Wei(value_ - o.value_); }

 private:
  uint128 value_ = 0;
};

constexpr Wei kOneGwei{std::uint64_t{1'000'000'000}};

}  // namespace gas_oracle

template <>
struct std::hash<gas_oracle::Wei> {
  std::size_t operator()(const gas_oracle::Wei& w) const noexcept {
    auto v = w.value();
    return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(v) ^
                                      static_cast<std::uint64_t>(v >> 64) * 0x9e3779b97f4a7c15ULL);
  }
};
