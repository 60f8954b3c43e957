#include "output.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace mftg::cli {

std::string format_number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(double value) {
  rows_.back().push_back(format_number(value));
  return *this;
}

CsvTable& CsvTable::add(long long value) {
  rows_.back().push_back(std::to_string(value));
  return *this;
}

CsvTable& CsvTable::add(std::string_view text) {
  const bool quote = text.find_first_of(",\"\n") != std::string_view::npos;
  if (!quote) {
    rows_.back().emplace_back(text);
    return *this;
  }
  std::string cell = "\"";
  for (const char c : text) {
    if (c == '"') cell += '"';
    cell += c;
  }
  cell += '"';
  rows_.back().push_back(std::move(cell));
  return *this;
}

CsvTable& CsvTable::add(std::optional<double> value) {
  return value ? add(*value) : empty();
}

CsvTable& CsvTable::empty() {
  rows_.back().emplace_back();
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j) out += ',';
      out += cells[j];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = path.parent_path() /
                   ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move output into place at " + path.string() + ": " +
                             ec.message());
  }
}

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int j = 0; j < length; ++j) {
    out += kHex[digest[j] >> 4];
    out += kHex[digest[j] & 0xF];
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

RunOutput::RunOutput(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  meta_["started_utc"] = utc_timestamp();
}

void RunOutput::write(const std::string& name, std::string_view contents) {
  write_atomic(dir_ / name, contents);
  files_[name] = sha256_hex(contents);
}

void RunOutput::set(const std::string& key, std::string value) { meta_[key] = std::move(value); }

void RunOutput::write_manifest() {
  meta_["finished_utc"] = utc_timestamp();
  std::ostringstream os;
  for (const auto& [key, value] : meta_) os << key << '=' << value << '\n';
  for (const auto& [name, hash] : files_) os << "file." << name << '=' << hash << '\n';
  write_atomic(dir_ / "manifest.txt", os.str());
}

}  // namespace mftg::cli
