#include "gas_oracle/wei.hpp"

#include <cmath>
#include <limits>

#include "gas_oracle/error.hpp"

namespace gas_oracle {

namespace {

constexpr uint128 kMax = ~uint128{0};

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Wei Wei::parse_decimal(std::string_view text) {
  if (text.empty()) throw PreconditionError("empty wei value");
  uint128 v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw PreconditionError("invalid decimal wei value '" + std::string(text) + "'");
    unsigned d = static_cast<unsigned>(c - '0');
    if (v > (kMax - d) / 10) throw PreconditionError("wei value overflows 128 bits");
    v = v * 10 + d;
  }
  return Wei(v);
}

Wei Wei::parse_hex(std::string_view text) {
  if (text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X'))
    throw PreconditionError("invalid hex quantity '" + std::string(text) + "'");
  uint128 v = 0;
  for (char c : text.substr(2)) {
    int d = hex_digit(c);
    if (d < 0) throw PreconditionError("invalid hex quantity '" + std::string(text) + "'");
    if (v >> 124) throw PreconditionError("hex quantity overflows 128 bits");
    v = (v << 4) | static_cast<unsigned>(d);
  }
  return Wei(v);
}

Wei Wei::ceil(long double x) {
  if (!(x > 0)) return Wei{};
  long double c = std::ceil(x);
  if (c >= 0x1p127L) throw PreconditionError("price overflows 128 bits");
  return Wei(static_cast<uint128>(c));
}

std::string Wei::to_string() const {
  if (value_ == 0) return "0";
  std::string out;
  for (uint128 v = value_; v; v /= 10) out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
  return {out.rbegin(), out.rend()};
}

std::string Wei::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  uint128 v = value_;
  do {
    out.push_back(kDigits[static_cast<int>(v & 0xf)]);
    v >>= 4;
  } while (v);
  return "0x" + std::string(out.rbegin(), out.rend());
}

}  // namespace gas_oracle
