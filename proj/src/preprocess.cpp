#include "gas_oracle/preprocess.hpp"

#include <algorithm>
#include <string>

#include "gas_oracle/error.hpp"

namespace gas_oracle {

std::vector<RawBlock> filter_small_blocks(std::span<const RawBlock> blocks) {
  std::vector<RawBlock> out;
  for (const auto& b : blocks) {
    if (b.gas_prices.size() >= kMinTransactionsPerBlock) out.push_back(b);
  }
  return out;
}

InterpolatedWei low_fee_threshold_exact(std::span<const Wei> prices) {
  if (prices.empty()) throw PreconditionError("low_fee_threshold of an empty block");
  return percentile_of(prices, kLowFeePercentile);
}

double low_fee_threshold(std::span<const Wei> prices) {
  return static_cast<double>(low_fee_threshold_exact(prices).value());
}

ProcessedBlock trim_block(const RawBlock& block) {
  if (block.gas_prices.size() < kMinTransactionsPerBlock)
    throw PreconditionError("trim_block: block " + std::to_string(block.block_number) + " has fewer than " +
                            std::to_string(kMinTransactionsPerBlock) + " transactions");
  const auto sorted = sorted_copy(block.gas_prices);
  const auto threshold = percentile_of_sorted(sorted, kLowFeePercentile);

  // The maximum never lies below the threshold, so a survivor always exists.
  auto first_kept = std::find_if_not(sorted.begin(), sorted.end(), [&](Wei p) { return threshold.is_above(p); });
  return ProcessedBlock{block.block_number, *first_kept,
                        static_cast<std::uint32_t>(std::distance(first_kept, sorted.end()))};
}

std::vector<ProcessedBlock> preprocess_chain(std::span<const RawBlock> blocks) {
  std::vector<ProcessedBlock> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.gas_prices.size() >= kMinTransactionsPerBlock) out.push_back(trim_block(b));
  }
  return out;
}

std::vector<ProcessedBlock> preprocess_chain(const Dataset& dataset) { return preprocess_chain(dataset.blocks); }

}  // namespace gas_oracle
