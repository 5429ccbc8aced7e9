#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

namespace toolsmith {

namespace fs = std::filesystem;

// Whole-file binary read. Throws Error{IoFailure}.
std::string read_file(const fs::path& path);

// Writes via a sibling temp file and rename, creating parent directories.
void write_file(const fs::path& path, std::string_view content);

bool is_valid_utf8(std::string_view bytes) noexcept;

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

// UTC wall-clock stamp formatted YYYYMMDD_HHMMSS.
std::string utc_stamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

// ISO-8601 UTC, second precision.
std::string utc_iso8601(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

// Lexically normalized `p` lies at or below `root` (no symlink resolution).
bool is_within(const fs::path& root, const fs::path& p);

// Generic-format relative path ("a/b.py").
std::string relative_key(const fs::path& root, const fs::path& p);

// `[A-Za-z0-9_-]+`
bool is_safe_identifier(std::string_view s) noexcept;

// Shell-safe single quoting for POSIX sh.
std::string shell_quote(std::string_view s);

}  // namespace toolsmith
