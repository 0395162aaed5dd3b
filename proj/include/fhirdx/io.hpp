// File plumbing: transparent gzip by ".gz" suffix, a streaming RFC-4180 CSV
// reader and writer, and JSON file helpers.
#pragma once

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fhirdx/common.hpp"
#include "json.hpp"

namespace fhirdx {

inline bool is_gzip_path(std::string_view path) { return ends_with(path, ".gz"); }

/// Sequential byte source. Paths ending in ".gz" are gunzipped; anything else
/// is read verbatim.
class InputFile {
 public:
  explicit InputFile(const std::string& path) : path_(path) {
    if (is_gzip_path(path)) {
      gz_ = gzopen(path.c_str(), "rb");
      if (!gz_) throw Error(ErrorCode::IoFailure, "cannot open " + path);
      gzbuffer(gz_, 1 << 17);
    } else {
      fp_ = std::fopen(path.c_str(), "rb");
      if (!fp_) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    }
  }
  InputFile(const InputFile&) = delete;
  InputFile& operator=(const InputFile&) = delete;
  ~InputFile() {
    if (gz_) gzclose(gz_);
    if (fp_) std::fclose(fp_);
  }

  /// Returns bytes read; 0 at end of stream. Corrupt or truncated gzip data
  /// raises IoFailure instead of reporting a short stream.
  std::size_t read(char* buf, std::size_t n) {
    if (gz_) {
      int got = gzread(gz_, buf, static_cast<unsigned>(n));
      int err = Z_OK;
      const char* msg = gzerror(gz_, &err);
      if (got < 0 || (err != Z_OK && err != Z_STREAM_END))
        throw Error(ErrorCode::IoFailure, path_ + ": " + (msg ? msg : "gzip read error"));
      return static_cast<std::size_t>(got);
    }
    std::size_t got = std::fread(buf, 1, n, fp_);
    if (got < n && std::ferror(fp_)) throw Error(ErrorCode::IoFailure, "read error on " + path_);
    return got;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  gzFile gz_ = nullptr;
  std::FILE* fp_ = nullptr;
};

/// Sequential byte sink, gzip-compressed when the path ends in ".gz". zlib's
/// gz writer emits a fixed header (no name, mtime 0), so output bytes depend
/// only on content.
class OutputFile {
 public:
  explicit OutputFile(const std::string& path) : path_(path) {
    if (is_gzip_path(path)) {
      gz_ = gzopen(path.c_str(), "wb6");
      if (!gz_) throw Error(ErrorCode::IoFailure, "cannot create " + path);
      gzbuffer(gz_, 1 << 17);
    } else {
      fp_ = std::fopen(path.c_str(), "wb");
      if (!fp_) throw Error(ErrorCode::IoFailure, "cannot create " + path);
    }
  }
  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;
  ~OutputFile() {
    try {
      close();
    } catch (...) {
    }
  }

  void write(std::string_view s) {
    if (s.empty()) return;
    if (gz_) {
      if (gzwrite(gz_, s.data(), static_cast<unsigned>(s.size())) != static_cast<int>(s.size()))
        throw Error(ErrorCode::IoFailure, "write error on " + path_);
    } else if (fp_) {
      if (std::fwrite(s.data(), 1, s.size(), fp_) != s.size())
        throw Error(ErrorCode::IoFailure, "write error on " + path_);
    } else {
      throw Error(ErrorCode::IoFailure, "write after close on " + path_);
    }
  }

  void close() {
    int rc = 0;
    if (gz_) {
      rc = gzclose(gz_) == Z_OK ? 0 : 1;
      gz_ = nullptr;
    }
    if (fp_) {
      rc = std::fclose(fp_);
      fp_ = nullptr;
    }
    if (rc != 0) throw Error(ErrorCode::IoFailure, "close failed on " + path_);
  }

 private:
  std::string path_;
  gzFile gz_ = nullptr;
  std::FILE* fp_ = nullptr;
};

inline std::string read_file(const std::string& path) {
  InputFile in(path);
  std::string out;
  std::vector<char> buf(1 << 16);
  while (std::size_t n = in.read(buf.data(), buf.size())) out.append(buf.data(), n);
  return out;
}

inline void write_file(const std::string& path, std::string_view content) {
  OutputFile out(path);
  out.write(content);
  out.close();
}

inline nlohmann::json read_json(const std::string& path) {
  std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
}

/// Keeps object members in file order.
inline nlohmann::ordered_json read_ordered_json(const std::string& path) {
  std::string text = read_file(path);
  try {
    return nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j, int indent = 1) {
  write_file(path, j.dump(indent) + "\n");
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j, int indent = 1) {
  write_file(path, j.dump(indent) + "\n");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Streaming RFC-4180 reader: quoted fields may contain separators, doubled
/// quotes and line breaks. Holds one record in memory at a time.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path, char quote = '"')
      : in_(std::make_unique<InputFile>(path)), quote_(quote), buf_(1 << 16) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// `line()` afterwards gives the 1-based physical line the record started on.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = peek();
    if (c == EOF) return false;
    record_line_ = line_;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    for (;;) {
      c = get();
      if (c == EOF) {
        if (in_quotes) throw Error(ErrorCode::MalformedRow, "unterminated quote starting on line " +
                                                             std::to_string(record_line_));
        fields.push_back(std::move(field));
        return true;
      }
      if (in_quotes) {
        if (c == quote_) {
          if (peek() == quote_) {
            get();
            field.push_back(static_cast<char>(quote_));
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == quote_ && field.empty() && !was_quoted) {
        in_quotes = true;
        was_quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (c == '\r') {
        if (peek() == '\n') get();
        fields.push_back(std::move(field));
        return true;
      } else if (c == '\n') {
        fields.push_back(std::move(field));
        return true;
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
  }

  std::size_t line() const { return record_line_; }

 private:
  int peek() {
    if (pos_ == end_ && !fill()) return EOF;
    return static_cast<unsigned char>(buf_[pos_]);
  }
  int get() {
    if (pos_ == end_ && !fill()) return EOF;
    char c = buf_[pos_++];
    if (c == '\n') ++line_;
    return static_cast<unsigned char>(c);
  }
  bool fill() {
    end_ = in_->read(buf_.data(), buf_.size());
    pos_ = 0;
    return end_ > 0;
  }

  std::unique_ptr<InputFile> in_;
  int quote_;
  std::vector<char> buf_;
  std::size_t pos_ = 0, end_ = 0;
  std::size_t line_ = 1, record_line_ = 1;
};

inline std::string csv_escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {}

  void row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) line.push_back(',');
      line += csv_escape(fields[i]);
    }
    line.push_back('\n');
    out_.write(line);
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  void close() { out_.close(); }

 private:
  OutputFile out_;
  std::size_t rows_ = 0;
};

/// Shortest round-tripping decimal rendering of a double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::uint64_t hash_file(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), fp))
    h = fnv1a64(std::string_view(buf.data(), n), h);
  std::fclose(fp);
  return h;
}

}  // namespace fhirdx
