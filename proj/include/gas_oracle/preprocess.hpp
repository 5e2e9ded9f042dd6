#pragma once

#include <span>
#include <vector>

#include "gas_oracle/blocks.hpp"
#include "gas_oracle/percentile.hpp"

namespace gas_oracle {

/// Blocks need at least this many transactions to be kept.
inline constexpr std::size_t kMinTransactionsPerBlock = 7;
/// Transactions priced strictly below this percentile of their block are dropped.
inline constexpr double kLowFeePercentile = 2.5;

/// Keeps blocks with >= kMinTransactionsPerBlock transactions, order preserved.
std::vector<RawBlock> filter_small_blocks(std::span<const RawBlock> blocks);

/// 2.5th percentile of a block's prices (linear interpolation). Throws
/// PreconditionError on an empty list.
double low_fee_threshold(std::span<const Wei> prices);

/// Same threshold in exact form, for strict comparisons against integer prices.
InterpolatedWei low_fee_threshold_exact(std::span<const Wei> prices);

/// Drops transactions below the block's low-fee threshold and reduces the
/// block to the minimum surviving price. Requires >= 7 transactions.
ProcessedBlock trim_block(const RawBlock& block);

/// filter_small_blocks followed by trim_block on each survivor.
std::vector<ProcessedBlock> preprocess_chain(const Dataset& dataset);
std::vector<ProcessedBlock> preprocess_chain(std::span<const RawBlock> blocks);

}  // namespace gas_oracle
