#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace simarena {

using json = nlohmann::json;

// Calls `fn(line_number, record)` for every non-blank line. Line numbers are
// 1-based. Throws ParseError on malformed JSON, IoError if the file is missing.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

// Appends one JSON document per line. Each record is serialized in full and
// written with a single write + flush, so readers never see a partial line
// from a completed call. Thread-safe.
class JsonlWriter {
 public:
  enum class Mode { kTruncate, kAppend };

  JsonlWriter(const std::filesystem::path& path, Mode mode);

  void write(const json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

// Writes `contents` to `path` via a temp file + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace simarena
