#include "refprior/table_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace refprior {

namespace {

constexpr const char* kCsvHeader = "theta,log_pi,pi,stderr";

double parse_double(const std::string& field, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  // Subnormals also set ERANGE but parse exactly.
  if (field.empty() || end != field.c_str() + field.size() || (errno == ERANGE && !std::isfinite(v))) {
    throw IoError("csv line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

std::vector<double> column(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) throw IoError(std::string("table json: missing column ") + key);
  std::vector<double> out;
  out.reserve(doc[key].size());
  for (const auto& v : doc[key]) {
    if (!v.is_number()) throw IoError(std::string("table json: non-numeric entry in ") + key);
    out.push_back(v.get<double>());
  }
  return out;
}

nlohmann::json meta_json(const PriorTable& table) {
  nlohmann::json meta = nlohmann::json::object();
  meta["k"] = table.meta.k;
  meta["m"] = table.meta.m;
  meta["seed"] = table.meta.seed;
  meta["anchor"] = table.anchor;
  meta["model"] = table.meta.model;
  meta["config_hash"] = hash_hex(table.meta.config_hash);
  return meta;
}

void read_meta(const nlohmann::json& meta, PriorTable& table) {
  try {
    table.meta.k = meta.at("k").get<std::size_t>();
    table.meta.m = meta.at("m").get<std::size_t>();
    table.meta.seed = meta.at("seed").get<std::uint64_t>();
    table.meta.model = meta.at("model").get<std::string>();
    table.anchor = meta.at("anchor").get<double>();
    const auto hash = meta.at("config_hash").get<std::string>();
    table.meta.config_hash = std::stoull(hash, nullptr, 16);
  } catch (const std::exception& e) {
    throw IoError(std::string("table meta: ") + e.what());
  }
}

}  // namespace

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::csv;
  if (name == "json") return TableFormat::json;
  throw DomainError("unknown table format '" + name + "'");
}

std::string to_string(TableFormat format) { return format == TableFormat::csv ? "csv" : "json"; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_double(double value) {
  if (value == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string table_csv(const PriorTable& table) {
  table.validate();
  std::string out = kCsvHeader;
  out += '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += format_double(table.grid[i]) + ',' + format_double(table.log_pi[i]) + ',' +
           format_double(std::exp(table.log_pi[i])) + ',' + format_double(table.std_err[i]) + '\n';
  }
  return out;
}

nlohmann::json table_json(const PriorTable& table, const nlohmann::json& extra_meta) {
  table.validate();
  nlohmann::json meta = meta_json(table);
  for (const auto& [key, value] : extra_meta.items()) meta[key] = value;
  nlohmann::json doc;
  doc["meta"] = meta;
  doc["theta"] = table.grid;
  doc["log_pi"] = table.log_pi;
  std::vector<double> pi(table.size());
  for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = std::exp(table.log_pi[i]);
  doc["pi"] = pi;
  doc["stderr"] = table.std_err;
  return doc;
}

PriorTable table_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("meta")) throw IoError("table json: missing meta");
  PriorTable table;
  read_meta(doc["meta"], table);
  table.grid = column(doc, "theta");
  table.log_pi = column(doc, "log_pi");
  table.std_err = column(doc, "stderr");
  try {
    table.validate();
  } catch (const InvariantViolation& e) {
    throw IoError(std::string("table json: ") + e.what());
  }
  return table;
}

PriorTable table_from_csv(const std::string& text, const nlohmann::json& sidecar) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("csv: header must be " + std::string(kCsvHeader));
  PriorTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw IoError("csv line " + std::to_string(line_no) + ": expected 4 fields");
    table.grid.push_back(parse_double(fields[0], line_no));
    table.log_pi.push_back(parse_double(fields[1], line_no));
    table.std_err.push_back(parse_double(fields[3], line_no));
  }
  if (sidecar.is_object()) {
    read_meta(sidecar, table);
  } else {
    // Without meta the anchor is the first row normalized to exactly 0.
    std::size_t i = 0;
    while (i < table.size() && table.log_pi[i] != 0.0) ++i;
    if (i == table.size()) throw IoError("csv: no anchor row");
    table.anchor = table.grid[i];
  }
  try {
    table.validate();
  } catch (const InvariantViolation& e) {
    throw IoError(std::string("csv: ") + e.what());
  }
  return table;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_table(const PriorTable& table, TableFormat format, const std::string& path,
                 const nlohmann::json& extra_meta) {
  if (format == TableFormat::json) {
    write_text(path, table_json(table, extra_meta).dump(2) + '\n');
    return;
  }
  write_text(path, table_csv(table));
  write_text(path + ".meta.json", table_json(table, extra_meta)["meta"].dump(2) + '\n');
}

PriorTable read_table(const std::string& path) {
  const std::string text = read_text(path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  try {
    if (json) return table_from_json(nlohmann::json::parse(text));
    std::ifstream sidecar(path + ".meta.json");
    if (!sidecar) return table_from_csv(text);
    return table_from_csv(text, nlohmann::json::parse(sidecar));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

}  // namespace refprior
