#include <atomic>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gas_oracle/data_ingest.hpp"
#include "gas_oracle/error.hpp"

namespace gas_oracle {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("RPC endpoint must be an http(s) URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string block_tag(BlockNumber n) { return Wei(n).to_hex(); }

// Transport or node-side trouble that is worth retrying.
struct TransientFailure {
  std::string reason;
};

class RpcFetcher {
 public:
  RpcFetcher(const std::string& endpoint, const RpcOptions& options)
      : endpoint_(split_endpoint(endpoint)), options_(options) {}

  std::unique_ptr<httplib::Client> make_client() const {
    auto client = std::make_unique<httplib::Client>(endpoint_.scheme_host_port);
    client->set_connection_timeout(options_.timeout);
    client->set_read_timeout(options_.timeout);
    client->set_keep_alive(true);
    return client;
  }

  RawBlock fetch(httplib::Client& client, BlockNumber number) const {
    std::string last_reason;
    auto backoff = options_.initial_backoff;
    for (unsigned attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      try {
        return fetch_once(client, number);
      } catch (const TransientFailure& f) {
        last_reason = f.reason;
      }
    }
    throw FetchError("eth_getBlockByNumber failed for block " + std::to_string(number) + " after " +
                         std::to_string(options_.max_retries + 1) + " attempts: " + last_reason,
                     number);
  }

 private:
  RawBlock fetch_once(httplib::Client& client, BlockNumber number) const {
    json request = {{"jsonrpc", "2.0"},
                    {"id", number},
                    {"method", "eth_getBlockByNumber"},
                    {"params", {block_tag(number), true}}};
    auto res = client.Post(endpoint_.path, request.dump(), "application/json");
    if (!res) throw TransientFailure{"transport error: " + httplib::to_string(res.error())};
    if (res->status != 200) throw TransientFailure{"HTTP status " + std::to_string(res->status)};

    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw TransientFailure{std::string("unparseable response: ") + e.what()};
    }
    if (body.contains("error") && !body["error"].is_null())
      throw TransientFailure{"RPC error: " + body["error"].dump()};
    if (!body.contains("result") || body["result"].is_null())
      throw TransientFailure{"block not available"};
    return parse_rpc_block(body["result"].dump(), number);
  }

  Endpoint endpoint_;
  RpcOptions options_;
};

}  // namespace

std::string default_rpc_endpoint() {
  const char* env = std::getenv("GAS_ORACLE_RPC_URL");
  return env ? std::string(env) : std::string();
}

RawBlock parse_rpc_block(std::string_view result_json, BlockNumber expected_number) {
  json result;
  try {
    result = json::parse(result_json);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("block result is not JSON: ") + e.what());
  }
  if (!result.is_object() || !result.contains("transactions") || !result["transactions"].is_array())
    throw SchemaError("block " + std::to_string(expected_number) + ": result has no transactions array");
  if (result.contains("number") && result["number"].is_string()) {
    auto reported = Wei::parse_hex(result["number"].get<std::string>());
    if (reported != Wei(expected_number))
      throw SchemaError("block " + std::to_string(expected_number) + ": node returned block " + reported.to_string());
  }

  RawBlock block{expected_number, {}};
  const auto& txs = result["transactions"];
  block.gas_prices.reserve(txs.size());
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const auto& tx = txs[i];
    if (!tx.is_object())
      throw SchemaError("block " + std::to_string(expected_number) +
                        ": transactions must be full objects (hydrated flag true)");
    if (!tx.contains("gasPrice") || !tx["gasPrice"].is_string())
      throw SchemaError("block " + std::to_string(expected_number) + " tx " + std::to_string(i) + ": missing gasPrice");
    try {
      block.gas_prices.push_back(Wei::parse_hex(tx["gasPrice"].get<std::string>()));
    } catch (const PreconditionError& e) {
      throw SchemaError("block " + std::to_string(expected_number) + " tx " + std::to_string(i) + ": " + e.what());
    }
  }
  return block;
}

Dataset fetch_block_range(const std::string& endpoint, BlockNumber start, BlockNumber end, const RpcOptions& options,
                          const BatchCallback& on_batch) {
  if (start > end) throw PreconditionError("fetch_block_range: start > end");
  if (options.concurrency == 0 || options.batch_size == 0)
    throw PreconditionError("fetch_block_range: concurrency and batch_size must be positive");

  RpcFetcher fetcher(endpoint, options);
  Dataset ds;
  ds.source_descriptor = endpoint + " blocks " + std::to_string(start) + "-" + std::to_string(end);

  for (BlockNumber batch_start = start;;) {
    const BlockNumber batch_end = std::min<BlockNumber>(end, batch_start + options.batch_size - 1);
    const std::size_t count = batch_end - batch_start + 1;
    std::vector<RawBlock> batch(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
      auto client = fetcher.make_client();
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          batch[i] = fetcher.fetch(*client, batch_start + i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    };
    {
      std::vector<std::jthread> workers;
      const auto n_workers = std::min<std::size_t>(options.concurrency, count);
      for (std::size_t w = 1; w < n_workers; ++w) workers.emplace_back(worker);
      worker();
    }
    if (failure) std::rethrow_exception(failure);

    if (on_batch) on_batch(batch);
    if (options.keep_blocks)
      ds.blocks.insert(ds.blocks.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    if (batch_end == end) break;
    batch_start = batch_end + 1;
  }
  return ds;
}

}  // namespace gas_oracle
