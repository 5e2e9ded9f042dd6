#include "gas_oracle/data_ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gas_oracle/error.hpp"

namespace gas_oracle {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::uint64_t parse_u64(std::string_view field, std::size_t line, const char* what) {
  if (field.empty()) throw ParseError(std::string("empty ") + what, line);
  std::uint64_t v = 0;
  for (char c : field) {
    if (c < '0' || c > '9') throw ParseError(std::string("invalid ") + what + " '" + std::string(field) + "'", line);
    if (v > (UINT64_MAX - static_cast<unsigned>(c - '0')) / 10) throw ParseError(std::string(what) + " overflows", line);
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v;
}

Wei parse_wei_field(std::string_view field, std::size_t line) {
  try {
    return Wei::parse_decimal(field);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what(), line);
  }
}

// Reads the header line, skipping a UTF-8 BOM. Returns false for an empty stream.
bool read_header(std::istream& in, std::string_view expected, const char* kind) {
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string_view h = line;
  if (h.starts_with("\xEF\xBB\xBF")) h.remove_prefix(3);
  h = trim(h);
  if (h != expected)
    throw SchemaError(std::string(kind) + " header must be '" + std::string(expected) + "', got '" + std::string(h) +
                      "'");
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Wei wei_from_json(const json& v, std::size_t block_index) {
  if (v.is_number_unsigned()) return Wei(v.get<std::uint64_t>());
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return Wei(v.get<std::int64_t>());
  if (v.is_string()) {
    try {
      return Wei::parse_decimal(v.get<std::string>());
    } catch (const PreconditionError& e) {
      throw ParseError(std::string("block entry ") + std::to_string(block_index) + ": " + e.what(), 0);
    }
  }
  throw ParseError("block entry " + std::to_string(block_index) + ": gas price must be a non-negative integer", 0);
}

}  // namespace

std::vector<Wei> min_prices(const std::vector<ProcessedBlock>& blocks) {
  std::vector<Wei> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.min_gas_price);
  return out;
}

DataFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".json" ? DataFormat::json : DataFormat::csv;
}

Dataset load_blocks(const std::filesystem::path& path, DataFormat format) {
  auto in = open_input(path);
  if (format == DataFormat::csv) return parse_blocks_csv(in, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_blocks_json(buffer.str(), path.string());
}

Dataset parse_blocks_csv(std::istream& in, std::string source_descriptor) {
  Dataset ds;
  ds.source_descriptor = std::move(source_descriptor);
  if (!read_header(in, kRawCsvHeader, "raw CSV")) return ds;

  struct Row {
    std::uint64_t tx;
    Wei price;
    std::size_t line;
  };
  std::vector<Row> current;  // rows of the block being accumulated
  auto flush = [&] {
    std::sort(current.begin(), current.end(), [](const Row& a, const Row& b) {
      return a.tx != b.tx ? a.tx < b.tx : a.line < b.line;
    });
    auto& block = ds.blocks.back();
    block.gas_prices.reserve(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (i > 0 && current[i].tx == current[i - 1].tx)
        throw OrderingError("duplicate row for block " + std::to_string(block.block_number) + " tx " +
                                std::to_string(current[i].tx),
                            current[i].line);
      block.gas_prices.push_back(current[i].price);
    }
    current.clear();
  };

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3)
      throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), lineno);
    auto block = parse_u64(fields[0], lineno, "block_number");
    auto tx = parse_u64(fields[1], lineno, "tx_index");
    auto price = parse_wei_field(fields[2], lineno);

    if (ds.blocks.empty() || block != ds.blocks.back().block_number) {
      if (!ds.blocks.empty()) {
        if (block < ds.blocks.back().block_number)
          throw OrderingError("block " + std::to_string(block) + " follows block " +
                                  std::to_string(ds.blocks.back().block_number),
                              lineno);
        flush();
      }
      ds.blocks.push_back(RawBlock{block, {}});
    }
    current.push_back({tx, price, lineno});
  }
  if (!ds.blocks.empty()) flush();

  return ds;
}

Dataset parse_blocks_json(std::string_view text, std::string source_descriptor) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  const json* arr = &doc;
  if (doc.is_object()) {
    if (!doc.contains("blocks")) throw SchemaError("JSON block file needs a top-level \"blocks\" array");
    arr = &doc["blocks"];
  }
  if (!arr->is_array()) throw SchemaError("JSON block file: \"blocks\" must be an array");

  Dataset ds;
  ds.source_descriptor = std::move(source_descriptor);
  ds.blocks.reserve(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& entry = (*arr)[i];
    if (!entry.is_object() || !entry.contains("block_number") || !entry.contains("gas_prices"))
      throw SchemaError("block entry " + std::to_string(i) + " needs block_number and gas_prices");
    const auto& bn = entry["block_number"];
    if (!bn.is_number_unsigned() && !(bn.is_number_integer() && bn.get<std::int64_t>() >= 0))
      throw ParseError("block entry " + std::to_string(i) + ": block_number must be a non-negative integer", 0);
    RawBlock block{bn.get<std::uint64_t>(), {}};
    if (!ds.blocks.empty() && block.block_number <= ds.blocks.back().block_number)
      throw OrderingError("block " + std::to_string(block.block_number) + " is out of order", 0);
    const auto& prices = entry["gas_prices"];
    if (!prices.is_array()) throw SchemaError("block entry " + std::to_string(i) + ": gas_prices must be an array");
    block.gas_prices.reserve(prices.size());
    for (const auto& p : prices) block.gas_prices.push_back(wei_from_json(p, i));
    ds.blocks.push_back(std::move(block));
  }
  return ds;
}

void write_blocks_csv(std::ostream& out, std::span<const RawBlock> blocks, bool header) {
  if (header) out << kRawCsvHeader << '\n';
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.gas_prices.size(); ++i)
      out << b.block_number << ',' << i << ',' << b.gas_prices[i].to_string() << '\n';
  }
}

void save_blocks(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_output(path);
  if (format_from_path(path) == DataFormat::json) {
    json arr = json::array();
    for (const auto& b : dataset.blocks) {
      json prices = json::array();
      for (const auto& p : b.gas_prices) prices.push_back(p.to_string());
      arr.push_back({{"block_number", b.block_number}, {"gas_prices", std::move(prices)}});
    }
    out << json{{"blocks", std::move(arr)}}.dump() << '\n';
  } else {
    write_blocks_csv(out, dataset.blocks);
  }
  finish_output(out, path);
}

void write_processed_csv(std::ostream& out, std::span<const ProcessedBlock> blocks) {
  out << kProcessedCsvHeader << '\n';
  for (const auto& b : blocks) out << b.block_number << ',' << b.min_gas_price.to_string() << '\n';
}

void save_processed(std::span<const ProcessedBlock> blocks, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_processed_csv(out, blocks);
  finish_output(out, path);
}

std::vector<ProcessedBlock> parse_processed_csv(std::istream& in) {
  std::vector<ProcessedBlock> out;
  if (!read_header(in, kProcessedCsvHeader, "processed CSV")) return out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 2) throw SchemaError("line " + std::to_string(lineno) + ": expected 2 fields");
    ProcessedBlock b{parse_u64(fields[0], lineno, "block_number"), parse_wei_field(fields[1], lineno), std::nullopt};
    if (!out.empty() && b.block_number <= out.back().block_number)
      throw OrderingError("block " + std::to_string(b.block_number) + " is out of order", lineno);
    out.push_back(b);
  }
  return out;
}

std::vector<ProcessedBlock> load_processed(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_processed_csv(in);
}

}  // namespace gas_oracle
