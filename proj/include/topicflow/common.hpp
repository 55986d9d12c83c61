#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace topicflow {

using json = nlohmann::json;

// Errors carry a category that maps onto CLI exit codes.
enum class ErrorKind { config, provider, data, internal };

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::provider: return 3;
    case ErrorKind::data: return 4;
    default: return 1;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct ProviderError : Error {
  explicit ProviderError(const std::string& what) : Error(ErrorKind::provider, what) {}
};

// Data errors raised while parsing a file; line is 1-based.
struct ParseError : DataError {
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

// ---------------------------------------------------------------------------
// Hashing

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string content_hash(std::string_view data) { return hex64(fnv1a64(data)); }
inline std::string content_hash(const std::string& data) { return content_hash(std::string_view(data)); }
inline std::string content_hash(const char* data) { return content_hash(std::string_view(data)); }

// Hash of the canonical (sorted-key, compact) JSON dump.
inline std::string content_hash(const json& j) { return content_hash(std::string_view(j.dump())); }

// ---------------------------------------------------------------------------
// Tokenization

enum class TokenMode { words, char_bigrams };

namespace detail {

inline bool is_ascii_separator(unsigned char c) {
  return std::isspace(c) || (c < 0x80 && std::ispunct(c));
}

// Splits UTF-8 text into code points.
inline std::vector<std::string> utf8_codepoints(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = s[i];
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Lowercased word tokens split on ASCII whitespace and punctuation; non-ASCII
// bytes are kept inside tokens.  char_bigrams mode emits overlapping code
// point bigrams of each word, which suits unsegmented scripts.
inline std::vector<std::string> tokenize(std::string_view text, TokenMode mode = TokenMode::words) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (detail::is_ascii_separator(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  if (mode == TokenMode::words) return words;

  std::vector<std::string> grams;
  for (const auto& w : words) {
    auto cps = detail::utf8_codepoints(w);
    if (cps.size() == 1) {
      grams.push_back(cps[0]);
      continue;
    }
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) grams.push_back(cps[i] + cps[i + 1]);
  }
  return grams;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes via a temp file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + hex64(fnv1a64(path.string()) ^ static_cast<std::uint64_t>(std::random_device{}()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Seeded sample of min(k, n) distinct indices of [0, n), returned sorted.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  std::uint64_t state = seed;
  // partial Fisher-Yates with a platform-independent generator
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(splitmix64(state) % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace topicflow
