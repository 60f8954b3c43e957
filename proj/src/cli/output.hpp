#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mftg::cli {

/// Shortest-safe text for a double: 17 significant digits.
std::string format_number(double value);

/// CSV table held in memory and written in one piece.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  /// Starts a new row; cells are appended with the add overloads.
  CsvTable& row();
  CsvTable& add(double value);
  CsvTable& add(long long value);
  CsvTable& add(int value) { return add(static_cast<long long>(value)); }
  CsvTable& add(std::string_view text);
  CsvTable& add(std::optional<double> value);
  CsvTable& empty();

  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes `contents` to a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);

std::string utc_timestamp();

/// Output directory plus the files written into it, recorded for the manifest.
class RunOutput {
 public:
  explicit RunOutput(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& name, std::string_view contents);
  void set(const std::string& key, std::string value);

  /// Writes manifest.txt: the metadata keys followed by one file.<name>=<sha256>
  /// entry per output file.
  void write_manifest();

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> meta_;
  std::map<std::string, std::string> files_;
};

}  // namespace mftg::cli
