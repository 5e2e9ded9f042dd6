#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gas_oracle/wei.hpp"

namespace gas_oracle {

using BlockNumber = std::uint64_t;

/// A mined block and the offered gas price of each of its transactions.
struct RawBlock {
  BlockNumber block_number = 0;
  std::vector<Wei> gas_prices;  // may be empty

  bool operator==(const RawBlock&) const = default;
};

/// Blocks in strictly increasing block-number order (gaps allowed).
struct Dataset {
  std::vector<RawBlock> blocks;
  std::string source_descriptor;
};

/// A block reduced to its post-trim minimum gas price y.
struct ProcessedBlock {
  BlockNumber block_number = 0;
  Wei min_gas_price;
  // Known after preprocessing; not persisted by the processed CSV format.
  std::optional<std::uint32_t> surviving_tx_count;

  bool operator==(const ProcessedBlock&) const = default;
};

/// The y series of a processed chain, in order.
std::vector<Wei> min_prices(const std::vector<ProcessedBlock>& blocks);

}  // namespace gas_oracle
