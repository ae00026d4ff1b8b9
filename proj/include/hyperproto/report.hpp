#pragma once

// Text renderings of run results: CSV rows with six significant digits and
// the key:value report document.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hyperproto/concentration.hpp"
#include "hyperproto/fewshot.hpp"

namespace hyperproto {

/// printf("%.6g").
std::string format_number(double v);

inline constexpr const char* kTrainCsvHeader = "space,d,param,test_acc,ci95,r_min,r_avg,r_max,episodes,seconds";
inline constexpr const char* kCompareCsvHeader =
    "space,d,param,seed,test_acc,ci95,r_min,r_avg,r_max,saturation,episodes,seconds";
inline constexpr const char* kConcentrationCsvHeader = "d,ratio,bound";

std::string train_csv_row(const RunReport& report);
/// `saturation` is left empty when absent.
std::string compare_csv_row(const RunReport& report, std::optional<double> saturation);
std::string concentration_csv(const std::vector<ConcentrationRow>& rows);

/// One `key: value` line per RunReport field, plus saturation when present.
std::string report_document(const RunReport& report, std::optional<double> saturation);

/// Saturation for Poincare configs, nothing otherwise.
std::optional<double> saturation_of(const RunReport& report, const ExperimentConfig& config);

/// Appends `row`, writing `header` first when the file is new or empty.
void append_csv_row(const std::filesystem::path& path, const std::string& header, const std::string& row);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hyperproto
