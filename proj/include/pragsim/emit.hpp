#pragma once
// Output of aggregated results as CSV or as aligned text panels.

#include <filesystem>
#include <ostream>
#include <vector>

#include "pragsim/harness.hpp"

namespace pragsim {

enum class EmitFormat { Csv, Text };

/// Header plus one row per summary, rows sorted by (scenario_id, method).
/// Absent values are written as empty fields.
void write_csv(const std::vector<ScenarioSummary>& summaries, std::ostream& out);

/// One panel per scenario with aligned columns.
void write_text(const std::vector<ScenarioSummary>& summaries, std::ostream& out);

/// Writes to `path`, or to stdout when the path is empty or "-". Throws Error
/// when the file cannot be written.
void emit_summaries(const std::vector<ScenarioSummary>& summaries, EmitFormat format,
                    const std::filesystem::path& path);

}  // namespace pragsim
