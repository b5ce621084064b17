#ifndef BIASAUDIT_CLI_H_
#define BIASAUDIT_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biasaudit/diagnostics.h"
#include "json.hpp"

namespace biasaudit {

// Entry point of the `biasaudit` tool. Exit codes: 0 success, 1 validation
// errors (bad or inconsistent input), 2 runtime errors. Errors and warnings
// go to `err` as one JSON object per line.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ValidateRequest {
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> captions;
  std::optional<std::filesystem::path> contexts;
  std::optional<std::filesystem::path> vectors;
  std::optional<std::filesystem::path> sidecar_emb;
  std::optional<std::filesystem::path> sidecar_lm;
  std::optional<std::filesystem::path> text_records;
  bool include_neutral = false;
  bool sentence_level = false;
};

// Loads every given file and cross-checks sidecar key coverage. Each missing
// key is reported once.
Diagnostics validate_inputs(const ValidateRequest& request);

nlohmann::ordered_json validation_report_json(const Diagnostics& diag);

}  // namespace biasaudit

#endif  // BIASAUDIT_CLI_H_
