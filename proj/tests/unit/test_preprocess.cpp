#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gas_oracle/error.hpp"
#include "gas_oracle/preprocess.hpp"

using namespace gas_oracle;

namespace {

RawBlock block_of(BlockNumber n, std::vector<std::uint64_t> prices) {
  RawBlock b{n, {}};
  for (auto p : prices) b.gas_prices.emplace_back(p);
  return b;
}

RawBlock block_with_count(BlockNumber n, std::size_t count) {
  return block_of(n, std::vector<std::uint64_t>(count, 10));
}

// Straight from the definition, in doubles: rank = 0.025 (n - 1).
double reference_threshold(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double rank = 0.025 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("small blocks are dropped") {
  const std::vector<RawBlock> in{block_with_count(1, 0), block_with_count(2, 6), block_with_count(3, 7),
                                 block_with_count(4, 100)};
  const auto out = filter_small_blocks(in);
  REQUIRE(out.size() == 2);
  CHECK(out[0].gas_prices.size() == 7);
  CHECK(out[1].gas_prices.size() == 100);
  CHECK(filter_small_blocks(out) == out);

  CHECK(filter_small_blocks(std::vector<RawBlock>{}).empty());
  const std::vector<RawBlock> sevens{block_with_count(1, 7), block_with_count(2, 7)};
  CHECK(filter_small_blocks(sevens) == sevens);
}

TEST_CASE("low fee threshold") {
  const std::vector<Wei> constant(20, Wei(42));
  CHECK(low_fee_threshold(constant) == 42.0);

  std::vector<Wei> zeros_and_tens(3, Wei(0));
  zeros_and_tens.resize(200, Wei(10));
  CHECK(low_fee_threshold(zeros_and_tens) > 0.0);
  CHECK(low_fee_threshold(zeros_and_tens) == doctest::Approx(reference_threshold(std::vector<double>(197, 10.0))));

  const std::vector<Wei> seven{Wei(1), Wei(2), Wei(3), Wei(4), Wei(5), Wei(6), Wei(7)};
  CHECK(low_fee_threshold(seven) == doctest::Approx(1.15));

  CHECK_THROWS_AS(low_fee_threshold(std::vector<Wei>{}), PreconditionError);
}

TEST_CASE("trim removes prices strictly below the threshold") {
  SUBCASE("three zero-fee transactions") {
    // 200 prices: rank 0.025 * 199 = 4.975, so the threshold sits between the
    // 5th and 6th smallest. With the cheapest paid price repeated, only the
    // zeros fall below it.
    std::vector<std::uint64_t> prices{0, 0, 0};
    prices.resize(13, 50);
    for (std::uint64_t i = 0; prices.size() < 200; ++i) prices.push_back(60 + i);
    const auto p = trim_block(block_of(11763787, prices));
    CHECK(p.min_gas_price == Wei(50));
    CHECK(p.surviving_tx_count == 197);
  }
  SUBCASE("distinct prices lose the five cheapest of 200") {
    std::vector<std::uint64_t> prices{0, 0, 0};
    for (std::uint64_t i = 0; prices.size() < 200; ++i) prices.push_back(50 + i);
    const auto p = trim_block(block_of(1, prices));
    CHECK(p.min_gas_price == Wei(52));
    CHECK(p.surviving_tx_count == 195);
  }
  SUBCASE("constant block keeps everything") {
    const auto p = trim_block(block_of(1, std::vector<std::uint64_t>(9, 77)));
    CHECK(p.min_gas_price == Wei(77));
    CHECK(p.surviving_tx_count == 9);
  }
  SUBCASE("1..7 loses only the smallest") {
    const auto p = trim_block(block_of(1, {7, 3, 1, 5, 2, 6, 4}));
    CHECK(p.min_gas_price == Wei(2));
    CHECK(p.surviving_tx_count == 6);
  }
  SUBCASE("a price equal to the threshold survives") {
    // rank 0.025 * 40 = 1 exactly, so the threshold is the second value
    std::vector<std::uint64_t> prices{5, 8};
    prices.resize(41, 100);
    const auto p = trim_block(block_of(1, prices));
    CHECK(p.min_gas_price == Wei(8));
    CHECK(p.surviving_tx_count == 40);
  }
  CHECK_THROWS_AS(trim_block(block_with_count(1, 6)), PreconditionError);
}

TEST_CASE("trim agrees with a direct evaluation on random blocks") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> count(7, 400);
  std::uniform_int_distribution<std::uint64_t> price(0, 300);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint64_t> prices(count(rng));
    for (auto& p : prices) p = price(rng) < 15 ? 0 : price(rng) * 1'000'000'000ULL;
    const auto raw = block_of(static_cast<BlockNumber>(trial), prices);
    const auto out = trim_block(raw);

    std::vector<double> as_double(prices.begin(), prices.end());
    const double t = reference_threshold(as_double);
    std::vector<std::uint64_t> survivors;
    for (auto p : prices)
      if (static_cast<double>(p) >= t) survivors.push_back(p);
    CAPTURE(trial);
    REQUIRE_FALSE(survivors.empty());
    CHECK(out.min_gas_price == Wei(*std::min_element(survivors.begin(), survivors.end())));
    CHECK(out.surviving_tx_count == survivors.size());
    CHECK(out.min_gas_price >= *std::min_element(raw.gas_prices.begin(), raw.gas_prices.end()));
  }
}

TEST_CASE("preprocess chain") {
  CHECK(preprocess_chain(Dataset{}).empty());

  const std::vector<RawBlock> single{block_of(5, {1, 2, 3, 4, 5, 6, 7})};
  const auto one = preprocess_chain(single);
  REQUIRE(one.size() == 1);
  CHECK(one[0].block_number == 5);
  CHECK(one[0].min_gas_price == Wei(2));

  Dataset ds;
  ds.blocks = {block_with_count(1, 0), block_of(2, {9, 9, 9, 9, 9, 9, 9, 9}), block_with_count(3, 3),
               block_of(4, {1, 2, 3, 4, 5, 6, 7})};
  const auto out = preprocess_chain(ds);
  REQUIRE(out.size() == 2);
  CHECK(out[0].block_number == 2);
  CHECK(out[1].block_number == 4);
  CHECK(min_prices(out) == std::vector<Wei>{Wei(9), Wei(2)});
}
