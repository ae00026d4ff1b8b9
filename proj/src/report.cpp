#include "hyperproto/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "hyperproto/errors.hpp"

namespace hyperproto {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string train_csv_row(const RunReport& r) {
  std::ostringstream out;
  out << r.space << ',' << r.d << ',' << format_number(r.param) << ',' << format_number(r.test_acc) << ','
      << format_number(r.ci95) << ',' << format_number(r.r_min) << ',' << format_number(r.r_avg) << ','
      << format_number(r.r_max) << ',' << r.episodes << ',' << format_number(r.seconds);
  return out.str();
}

std::string compare_csv_row(const RunReport& r, std::optional<double> saturation) {
  std::ostringstream out;
  out << r.space << ',' << r.d << ',' << format_number(r.param) << ',' << r.seed << ',' << format_number(r.test_acc)
      << ',' << format_number(r.ci95) << ',' << format_number(r.r_min) << ',' << format_number(r.r_avg) << ','
      << format_number(r.r_max) << ',' << (saturation ? format_number(*saturation) : "") << ',' << r.episodes << ','
      << format_number(r.seconds);
  return out.str();
}

std::string concentration_csv(const std::vector<ConcentrationRow>& rows) {
  std::string out = std::string(kConcentrationCsvHeader) + '\n';
  for (const auto& row : rows) {
    out += std::to_string(row.d) + ',' + format_number(row.ratio) + ',' + format_number(row.bound) + '\n';
  }
  return out;
}

std::string report_document(const RunReport& r, std::optional<double> saturation) {
  std::ostringstream out;
  out << "space: " << r.space << '\n'
      << "d: " << r.d << '\n'
      << "param: " << format_number(r.param) << '\n'
      << "seed: " << r.seed << '\n'
      << "test_acc: " << format_number(r.test_acc) << '\n'
      << "ci95: " << format_number(r.ci95) << '\n'
      << "r_min: " << format_number(r.r_min) << '\n'
      << "r_avg: " << format_number(r.r_avg) << '\n'
      << "r_max: " << format_number(r.r_max) << '\n';
  if (saturation) out << "saturation: " << format_number(*saturation) << '\n';
  out << "episodes: " << r.episodes << '\n' << "seconds: " << format_number(r.seconds) << '\n';
  return out.str();
}

std::optional<double> saturation_of(const RunReport& report, const ExperimentConfig& config) {
  if (!config.space.is_poincare()) return std::nullopt;
  return saturation_metric(report, config.space, config.clip);
}

void append_csv_row(const std::filesystem::path& path, const std::string& header, const std::string& row) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0 || ec;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string() + " for appending");
  if (fresh) out << header << '\n';
  out << row << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hyperproto
