#ifndef BIASAUDIT_FORMAT_H_
#define BIASAUDIT_FORMAT_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace biasaudit {

// Two-decimal table value, truncated toward zero (the convention of the
// published tables: 616/833 = 0.7395 prints as 0.73). A 1e-9 guard absorbs
// representation error, so 0.66 stored as 0.65999.. still prints 0.66.
std::string format_table_value(double x);

// Empty cell for nullopt.
std::string format_table_value(const std::optional<double>& x);

// RFC 4180 quoting when a field holds a comma, quote or newline.
std::string csv_field(std::string_view field);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Full-precision JSON value; nullopt becomes null.
nlohmann::ordered_json json_or_null(const std::optional<double>& x);

}  // namespace biasaudit

#endif  // BIASAUDIT_FORMAT_H_
