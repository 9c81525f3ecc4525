#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "refprior/errors.hpp"
#include "refprior/numerics.hpp"

namespace refprior {

// File could not be opened, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class TableFormat { csv, json };
TableFormat parse_table_format(const std::string& name);
std::string to_string(TableFormat format);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t hash);

// Shortest form that is still 17 significant digits ("%.17g"); 0 stays "0".
std::string format_double(double value);

// Header `theta,log_pi,pi,stderr` plus one row per grid point.
std::string table_csv(const PriorTable& table);
// meta (k, m, seed, anchor, model, config_hash, then every key of extra) and
// one array per column.
nlohmann::json table_json(const PriorTable& table, const nlohmann::json& extra_meta = nlohmann::json::object());
PriorTable table_from_json(const nlohmann::json& doc);
// Inverse of table_csv; meta comes from the sidecar when given.
PriorTable table_from_csv(const std::string& text, const nlohmann::json& sidecar = nlohmann::json());

// CSV output also writes `<path>.meta.json` holding the meta object.
void write_table(const PriorTable& table, TableFormat format, const std::string& path,
                 const nlohmann::json& extra_meta = nlohmann::json::object());
// Format chosen by extension (.json, otherwise CSV); picks up the sidecar.
PriorTable read_table(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace refprior
