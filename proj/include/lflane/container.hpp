#pragma once

// Text header + flat little-endian binary blob. Every on-disk array in the
// project (light fields, images, lenslet images, checkpoints) uses this pair.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lflane/error.hpp"

namespace lflane {

namespace fs = std::filesystem;

inline constexpr const char* header_magic = "# lflane container v1";

class header {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  template <typename T>
  void set(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    set(key, os.str());
  }

  bool has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& kv) { return kv.first == key; });
  }

  const std::string& get(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return kv.second;
    throw data_error("header: missing key '" + key + "'");
  }

  long long get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty())
      throw data_error("header: key '" + key + "' is not an integer: " + s);
    return v;
  }

  void expect(const std::string& key, const std::string& value) const {
    if (get(key) != value)
      throw data_error("header: key '" + key + "' must be '" + value + "', got '" + get(key) + "'");
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const {
    std::string out = std::string(header_magic) + "\n";
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  static header parse(const std::string& text) {
    header h;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header_magic) throw data_error("header: bad magic line");
        continue;
      }
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find(" = ");
      if (eq == std::string::npos) throw data_error("header: malformed line: " + line);
      h.set(line.substr(0, eq), line.substr(eq + 3));
    }
    if (first) throw data_error("header: empty file");
    return h;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temp file and renames, so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw data_error("write failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw data_error("cannot rename into " + path.string());
  }
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

namespace detail {

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

}  // namespace detail

template <typename T>
std::vector<char> encode_blob(std::span<const T> values) {
  std::vector<char> bytes(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    T le = detail::to_little_endian(values[i]);
    std::memcpy(bytes.data() + i * sizeof(T), &le, sizeof(T));
  }
  return bytes;
}

template <typename T>
std::vector<T> read_blob(const fs::path& path, std::size_t expected_count) {
  std::string bytes = read_text_file(path);
  if (bytes.size() != expected_count * sizeof(T)) {
    throw data_error("blob size mismatch in " + path.string() + ": expected " +
                     std::to_string(expected_count) + " samples, found " +
                     std::to_string(bytes.size() / sizeof(T)) +
                     (bytes.size() % sizeof(T) ? " (plus trailing bytes)" : ""));
  }
  std::vector<T> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    out[i] = detail::to_little_endian(v);
  }
  return out;
}

// Blob file name stored in a header is relative to the header's directory.
inline fs::path blob_path_for(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".bin");
  return p;
}

template <typename T>
void save_container(const fs::path& header_path, header h, std::span<const T> values) {
  const fs::path blob = blob_path_for(header_path);
  h.set("blob", blob.filename().string());
  write_file_atomic(blob, encode_blob(values));
  write_text_atomic(header_path, h.to_string());
}

template <typename T>
std::pair<header, std::vector<T>> load_container(const fs::path& header_path,
                                                 std::size_t (*count_from)(const header&)) {
  if (!fs::exists(header_path)) throw data_error("missing file: " + header_path.string());
  header h = header::parse(read_text_file(header_path));
  const std::size_t n = count_from(h);
  fs::path blob = header_path.parent_path() / h.get("blob");
  if (!fs::exists(blob)) throw data_error("missing blob: " + blob.string());
  return {h, read_blob<T>(blob, n)};
}

}  // namespace lflane
