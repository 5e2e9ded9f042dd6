#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gas_oracle/data_ingest.hpp"
#include "gas_oracle/error.hpp"

using namespace gas_oracle;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "gas_oracle_tests";
  fs::create_directories(dir);
  return dir / name;
}

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_blocks_csv(in, "test");
}

// Minimal JSON-RPC node. Block N carries N % 4 + 1 transactions priced 1, 2, ...
// Blocks listed in `flaky` answer 503 that many times before succeeding.
class FakeNode {
 public:
  FakeNode() {
    server_.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeNode() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/rpc"; }

  std::map<BlockNumber, int> flaky;
  std::map<BlockNumber, nlohmann::json> overrides;  // block -> raw result
  std::atomic<int> requests{0};

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests;
    auto body = nlohmann::json::parse(req.body);
    const auto number = static_cast<BlockNumber>(Wei::parse_hex(body["params"][0].get<std::string>()).value());
    {
      std::lock_guard lock(mutex_);
      auto it = flaky.find(number);
      if (it != flaky.end() && it->second > 0) {
        --it->second;
        res.status = 503;
        return;
      }
    }
    nlohmann::json result;
    if (auto it = overrides.find(number); it != overrides.end()) {
      result = it->second;
    } else {
      nlohmann::json txs = nlohmann::json::array();
      for (unsigned i = 0; i < number % 4 + 1; ++i) txs.push_back({{"gasPrice", Wei(i + 1).to_hex()}});
      result = {{"number", Wei(number).to_hex()}, {"transactions", txs}};
    }
    res.set_content(nlohmann::json{{"jsonrpc", "2.0"}, {"id", body["id"]}, {"result", result}}.dump(),
                    "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
};

RpcOptions fast_options() {
  RpcOptions o;
  o.initial_backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

}  // namespace

TEST_CASE("raw CSV rows group into blocks") {
  const auto ds = parse_csv(
      "block_number,tx_index,gas_price_wei\n"
      "100,0,5000000000\n"
      "100,1,7000000000\n"
      "101,0,6000000000\n");
  REQUIRE(ds.blocks.size() == 2);
  CHECK(ds.blocks[0].block_number == 100);
  CHECK(ds.blocks[0].gas_prices == std::vector<Wei>{Wei(5000000000ULL), Wei(7000000000ULL)});
  CHECK(ds.blocks[1].gas_prices == std::vector<Wei>{Wei(6000000000ULL)});
}

TEST_CASE("raw CSV edge cases") {
  CHECK(parse_csv("block_number,tx_index,gas_price_wei\n").blocks.empty());
  CHECK(parse_csv("").blocks.empty());

  SUBCASE("tx rows out of order are sorted by index") {
    const auto ds = parse_csv("block_number,tx_index,gas_price_wei\n7,1,20\n7,0,10\n");
    CHECK(ds.blocks[0].gas_prices == std::vector<Wei>{Wei(10), Wei(20)});
  }
  SUBCASE("BOM, CRLF and padding are tolerated") {
    const auto ds = parse_csv("\xEF\xBB\xBF" "block_number,tx_index,gas_price_wei\r\n 7 , 0 , 10 \r\n");
    REQUIRE(ds.blocks.size() == 1);
    CHECK(ds.blocks[0].gas_prices[0] == Wei(10));
  }
  SUBCASE("decreasing block number") {
    CHECK_THROWS_AS(parse_csv("block_number,tx_index,gas_price_wei\n100,0,1\n99,0,1\n"), OrderingError);
  }
  SUBCASE("duplicate tx row reports its line") {
    try {
      parse_csv("block_number,tx_index,gas_price_wei\n5,0,1\n5,1,1\n5,0,2\n");
      FAIL("expected OrderingError");
    } catch (const OrderingError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("malformed rows") {
    CHECK_THROWS_AS(parse_csv("block_number,tx_index,gas_price_wei\n5,0\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("block_number,tx_index,gas_price_wei\n5,0,1.5\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("block_number,tx_index,gas_price_wei\nx,0,1\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("block,tx,price\n5,0,1\n"), SchemaError);
  }
}

TEST_CASE("raw JSON blocks") {
  const auto ds = parse_blocks_json(
      R"({"blocks": [{"block_number": 1, "gas_prices": [3, "1000000000000000000000000"]},
                     {"block_number": 4, "gas_prices": []}]})",
      "mem");
  REQUIRE(ds.blocks.size() == 2);
  CHECK(ds.blocks[0].gas_prices[1] == Wei::parse_decimal("1000000000000000000000000"));
  CHECK(ds.blocks[1].gas_prices.empty());

  CHECK(parse_blocks_json("[]", "mem").blocks.empty());
  CHECK_THROWS_AS(parse_blocks_json("{", "mem"), ParseError);
  CHECK_THROWS_AS(parse_blocks_json(R"({"rows": []})", "mem"), SchemaError);
  CHECK_THROWS_AS(parse_blocks_json(R"([{"block_number": 1, "gas_prices": [-1]}])", "mem"), ParseError);
  CHECK_THROWS_AS(
      parse_blocks_json(R"([{"block_number": 2, "gas_prices": []}, {"block_number": 1, "gas_prices": []}])", "mem"),
      OrderingError);
}

TEST_CASE("raw blocks survive save and load in both formats") {
  Dataset ds;
  ds.blocks = {{10, {Wei(3), Wei(1)}}, {12, {}}, {13, {Wei::parse_decimal("123456789012345678901234567890")}}};
  for (const char* name : {"raw.csv", "raw.json"}) {
    CAPTURE(name);
    const auto path = temp_path(name);
    save_blocks(ds, path);
    const auto back = load_blocks(path, format_from_path(path));
    if (format_from_path(path) == DataFormat::json) {
      CHECK(back.blocks == ds.blocks);
    } else {
      // a block without transactions has no rows in CSV
      REQUIRE(back.blocks.size() == 2);
      CHECK(back.blocks[0] == ds.blocks[0]);
      CHECK(back.blocks[1] == ds.blocks[2]);
    }
  }
  CHECK_THROWS_AS(load_blocks(temp_path("missing.csv"), DataFormat::csv), IoError);
}

TEST_CASE("processed CSV round-trip") {
  SUBCASE("three blocks") {
    const std::vector<ProcessedBlock> blocks{{1, Wei(5), {}}, {2, Wei(7), {}}, {9, Wei(1), {}}};
    const auto path = temp_path("processed3.csv");
    save_processed(blocks, path);
    CHECK(load_processed(path) == blocks);
  }
  SUBCASE("68,545 blocks") {
    std::vector<ProcessedBlock> blocks;
    std::uint64_t x = 88172645463325252ULL;
    for (std::uint64_t i = 0; i < 68545; ++i) {
      x ^= x << 13;
      x ^= x >> 7;
      x ^= x << 17;
      blocks.push_back({11753792 + i, Wei(x % 500'000'000'000ULL), {}});
    }
    const auto path = temp_path("processed_large.csv");
    save_processed(blocks, path);
    const auto back = load_processed(path);
    CHECK(back.size() == 68545);
    CHECK(back == blocks);
  }
  SUBCASE("unknown column is a schema error") {
    std::istringstream in("block_number,min_gas_price_wei,extra\n1,5,x\n");
    CHECK_THROWS_AS(parse_processed_csv(in), SchemaError);
    std::istringstream in2("block_number,min_gas_price_wei\n1,5,x\n");
    CHECK_THROWS_AS(parse_processed_csv(in2), SchemaError);
  }
}

TEST_CASE("rpc block parsing") {
  const auto b = parse_rpc_block(
      R"({"number":"0x10","transactions":[{"gasPrice":"0x1"},{"gasPrice":"0x2"},{"gasPrice":"0x3"}]})", 16);
  CHECK(b.block_number == 16);
  CHECK(b.gas_prices == std::vector<Wei>{Wei(1), Wei(2), Wei(3)});
  CHECK_THROWS_AS(parse_rpc_block(R"({"number":"0x10","transactions":[{"hash":"0xab"}]})", 16), SchemaError);
  CHECK_THROWS_AS(parse_rpc_block(R"({"number":"0x11","transactions":[]})", 16), SchemaError);
  CHECK_THROWS_AS(parse_rpc_block(R"({"number":"0x10"})", 16), SchemaError);
}

TEST_CASE("fetch_block_range against a local node") {
  FakeNode node;

  SUBCASE("single block decodes hex prices") {
    const auto ds = fetch_block_range(node.url(), 6, 6, fast_options());
    REQUIRE(ds.blocks.size() == 1);
    CHECK(ds.blocks[0].block_number == 6);
    CHECK(ds.blocks[0].gas_prices == std::vector<Wei>{Wei(1), Wei(2), Wei(3)});
  }
  SUBCASE("start > end") { CHECK_THROWS_AS(fetch_block_range(node.url(), 7, 6, fast_options()), PreconditionError); }
  SUBCASE("adjacent ranges concatenate") {
    auto opts = fast_options();
    opts.batch_size = 3;
    const auto whole = fetch_block_range(node.url(), 100, 120, opts);
    auto left = fetch_block_range(node.url(), 100, 109, opts).blocks;
    const auto right = fetch_block_range(node.url(), 110, 120, opts).blocks;
    left.insert(left.end(), right.begin(), right.end());
    CHECK(whole.blocks == left);
    CHECK(whole.blocks.size() == 21);
  }
  SUBCASE("transient failures are retried") {
    node.flaky[50] = 2;
    const auto ds = fetch_block_range(node.url(), 48, 52, fast_options());
    CHECK(ds.blocks.size() == 5);
  }
  SUBCASE("persistent failure names the block") {
    node.flaky[51] = 100;
    auto opts = fast_options();
    opts.max_retries = 2;
    try {
      fetch_block_range(node.url(), 48, 52, opts);
      FAIL("expected FetchError");
    } catch (const FetchError& e) {
      CHECK(e.block() == 51);
    }
  }
  SUBCASE("missing gasPrice is a schema error") {
    node.overrides[9] = {{"number", "0x9"}, {"transactions", {{{"hash", "0x1"}}}}};
    CHECK_THROWS_AS(fetch_block_range(node.url(), 9, 9, fast_options()), SchemaError);
  }
  SUBCASE("batches arrive in block order") {
    auto opts = fast_options();
    opts.batch_size = 4;
    opts.keep_blocks = false;
    std::vector<BlockNumber> seen;
    fetch_block_range(node.url(), 1, 10, opts, [&](std::span<const RawBlock> batch) {
      for (const auto& b : batch) seen.push_back(b.block_number);
    });
    CHECK(seen == std::vector<BlockNumber>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  }
  SUBCASE("unreachable endpoint fails") {
    auto opts = fast_options();
    opts.max_retries = 0;
    opts.timeout = std::chrono::seconds(1);
    CHECK_THROWS_AS(fetch_block_range("http://127.0.0.1:1/rpc", 1, 1, opts), FetchError);
    CHECK_THROWS_AS(fetch_block_range("not a url", 1, 1, opts), PreconditionError);
  }
}
