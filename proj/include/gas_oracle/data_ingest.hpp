#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gas_oracle/blocks.hpp"

namespace gas_oracle {

enum class DataFormat { csv, json };

/// Picks json for a ".json" extension, csv otherwise.
DataFormat format_from_path(const std::filesystem::path& path);

inline constexpr std::string_view kRawCsvHeader = "block_number,tx_index,gas_price_wei";
inline constexpr std::string_view kProcessedCsvHeader = "block_number,min_gas_price_wei";

// Raw block files.
//
// CSV: one row per transaction under kRawCsvHeader. Rows of one block must be
// contiguous; a block number lower than or equal to an earlier block raises
// OrderingError, as does a repeated (block, tx_index) pair.
//
// JSON: {"blocks": [{"block_number": N, "gas_prices": [p, ...]}, ...]} or the
// bare array. Prices may be JSON integers or decimal strings.
Dataset load_blocks(const std::filesystem::path& path, DataFormat format);
Dataset parse_blocks_csv(std::istream& in, std::string source_descriptor);
Dataset parse_blocks_json(std::string_view text, std::string source_descriptor);

void write_blocks_csv(std::ostream& out, std::span<const RawBlock> blocks, bool header = true);
void save_blocks(const Dataset& dataset, const std::filesystem::path& path);

// Processed block files (kProcessedCsvHeader). surviving_tx_count is not part of the format.
void save_processed(std::span<const ProcessedBlock> blocks, const std::filesystem::path& path);
void write_processed_csv(std::ostream& out, std::span<const ProcessedBlock> blocks);
std::vector<ProcessedBlock> load_processed(const std::filesystem::path& path);
std::vector<ProcessedBlock> parse_processed_csv(std::istream& in);

struct RpcOptions {
  unsigned concurrency = 4;
  unsigned max_retries = 4;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::seconds timeout{30};
  // Blocks fetched before each on_batch delivery.
  std::size_t batch_size = 64;
  // False when on_batch persists the blocks and the returned Dataset may stay empty.
  bool keep_blocks = true;
};

/// Called with consecutive, block-ordered slices as they complete.
using BatchCallback = std::function<void(std::span<const RawBlock>)>;

/// Fetches blocks [start, end] with eth_getBlockByNumber(hex, true) and reads
/// every transaction's gasPrice. Requests run with bounded concurrency but
/// results are delivered in block order.
///
/// Throws PreconditionError if start > end, FetchError naming the block when
/// a request still fails after retries, SchemaError if a transaction has no
/// gasPrice.
Dataset fetch_block_range(const std::string& endpoint, BlockNumber start, BlockNumber end,
                          const RpcOptions& options = {}, const BatchCallback& on_batch = {});

/// Default endpoint from GAS_ORACLE_RPC_URL, empty if unset.
std::string default_rpc_endpoint();

/// Extracts the gas prices of one eth_getBlockByNumber result object.
RawBlock parse_rpc_block(std::string_view result_json, BlockNumber expected_number);

}  // namespace gas_oracle
