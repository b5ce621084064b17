#include "biasaudit/format.h"

#include <cmath>
#include <cstdio>

#include "biasaudit/diagnostics.h"

namespace biasaudit {

std::string format_table_value(double x) {
  if (!std::isfinite(x)) return "";
  const double scaled = std::trunc(x * 100.0 + (x < 0 ? -1e-9 : 1e-9));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", scaled / 100.0);
  std::string out(buf);
  if (out == "-0.00") out = "0.00";
  return out;
}

std::string format_table_value(const std::optional<double>& x) {
  return x ? format_table_value(*x) : std::string();
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw Error(ErrorCode::kDomain, "csv: row width does not match header");
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

nlohmann::ordered_json json_or_null(const std::optional<double>& x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

}  // namespace biasaudit
