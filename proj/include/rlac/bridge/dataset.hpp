#pragma once

// Preference datasets for external DPO trainers: a schema header line, then
// one JSON record per pair ordered by (prompt hash, pair index).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlac/error.hpp"
#include "rlac/rng.hpp"

namespace rlac::bridge {

inline constexpr const char* kDatasetSchema = "rlac-dpo/1";

struct PreferenceRecord {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string player;                // generator | critic
  std::size_t pair_index = 0;        // position within the prompt's pairs
  nlohmann::ordered_json metadata;   // round, verdict ids, proposal text, ...
  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

inline std::string dataset_text(std::vector<PreferenceRecord> records) {
  if (records.empty()) throw Error(ErrorCode::Config, "no preference records to export");
  for (const auto& r : records) {
    if (r.chosen == r.rejected) throw Error(ErrorCode::Config, "record has identical chosen and rejected text");
    if (r.player != "generator" && r.player != "critic")
      throw Error(ErrorCode::Config, "record player must be 'generator' or 'critic', got '" + r.player + "'");
  }
  std::stable_sort(records.begin(), records.end(), [](const PreferenceRecord& a, const PreferenceRecord& b) {
    const auto ha = fnv1a64(a.prompt), hb = fnv1a64(b.prompt);
    if (ha != hb) return ha < hb;
    if (a.prompt != b.prompt) return a.prompt < b.prompt;
    if (a.player != b.player) return a.player < b.player;
    return a.pair_index < b.pair_index;
  });
  std::string out = nlohmann::ordered_json{{"schema", kDatasetSchema}, {"records", records.size()}}.dump() + "\n";
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["prompt"] = r.prompt;
    j["chosen"] = r.chosen;
    j["rejected"] = r.rejected;
    j["player"] = r.player;
    auto meta = r.metadata.is_null() ? nlohmann::ordered_json::object() : r.metadata;
    meta["pair_index"] = r.pair_index;
    j["metadata"] = meta;
    out += j.dump() + "\n";
  }
  return out;
}

inline void export_dpo_dataset(const std::vector<PreferenceRecord>& records, const std::filesystem::path& path) {
  const auto text = dataset_text(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

inline std::vector<PreferenceRecord> read_dpo_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ProtocolError, path.string() + ": empty dataset");
  const auto head = nlohmann::json::parse(line, nullptr, false);
  if (head.is_discarded() || head.value("schema", "") != kDatasetSchema)
    throw Error(ErrorCode::ProtocolError, path.string() + ": missing or unknown schema header");
  std::vector<PreferenceRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::ProtocolError, path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    if (j.is_discarded()) throw bad("not JSON");
    for (const char* k : {"prompt", "chosen", "rejected", "player"})
      if (!j.contains(k) || !j[k].is_string()) throw bad(std::string("missing string field '") + k + "'");
    if (!j.contains("metadata") || !j["metadata"].is_object() || !j["metadata"].contains("pair_index"))
      throw bad("missing metadata.pair_index");
    PreferenceRecord r;
    r.prompt = j["prompt"];
    r.chosen = j["chosen"];
    r.rejected = j["rejected"];
    r.player = j["player"];
    r.metadata = j["metadata"];
    r.pair_index = r.metadata["pair_index"].get<std::size_t>();
    r.metadata.erase("pair_index");
    out.push_back(std::move(r));
  }
  if (out.size() != head.value("records", std::size_t{0}))
    throw Error(ErrorCode::ProtocolError, path.string() + ": header record count does not match");
  return out;
}

}  // namespace rlac::bridge
