#pragma once

// Activation cache files.
//
// Layout, all integers little-endian:
//   bytes 0..7    magic "ACTCACH" followed by the format version digit '1'
//   bytes 8..15   u64 length L of the manifest
//   next L bytes  UTF-8 JSON manifest
//   remainder     n_prompts × dim matrix, row-major, f32 or f64 per the manifest
//
// The file size must equal 16 + L + n_prompts·dim·sizeof(dtype) exactly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csteer/activation_set.hpp"
#include "csteer/errors.hpp"
#include "csteer/linalg.hpp"
#include "csteer/steering.hpp"

namespace csteer {

inline constexpr std::string_view kCacheMagicPrefix = "ACTCACH";
inline constexpr char kCacheFormatVersion = '1';
inline constexpr std::size_t kCacheHeaderBytes = 16;

enum class DType { f32, f64 };

const char* to_string(DType dtype);
std::optional<DType> parse_dtype(std::string_view tag);
std::size_t element_size(DType dtype);

/// Optional manifest section present in files that carry a steering mechanism
/// (a conceptor matrix or a 1×d steering vector) instead of activations.
struct MechanismInfo {
  MechanismKind kind = MechanismKind::conceptor;
  std::optional<double> alpha;
  std::optional<double> beta;
  bool mean_centered = false;
  std::vector<double> mu_train;
  Index mu_source_count = 0;

  friend bool operator==(const MechanismInfo&, const MechanismInfo&) = default;
};

struct CacheManifest {
  std::string model_id;
  std::uint64_t layer_index = 0;
  std::string task_label;
  Index n_prompts = 0;
  Index n_examples_per_prompt = 1;
  Index dim = 0;
  DType dtype = DType::f64;
  std::int64_t seed = 0;
  std::int64_t created_unix_ms = 0;
  std::optional<MechanismInfo> mechanism;

  friend bool operator==(const CacheManifest&, const CacheManifest&) = default;
};

/// Manifest plus raw payload. The payload is not validated on construction so
/// that validate_cache can report on faulty contents.
struct ActivationCacheFile {
  CacheManifest manifest;
  Matrixd payload;

  /// Throws ValidationError if the payload is not a valid activation set.
  ActivationSetd activations() const { return ActivationSetd(payload); }
};

struct Finding {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const { return findings.empty(); }
  bool has(std::string_view code) const;
};

/// Format violation found while reading a cache file. `code()` matches the
/// Finding codes: "truncated", "bad magic", "unsupported version",
/// "manifest", "length mismatch", "dim mismatch", "row count mismatch",
/// "non-finite".
class CacheFormatError : public ValidationError {
 public:
  CacheFormatError(std::string code, const std::string& message)
      : ValidationError(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

std::string manifest_to_json(const CacheManifest& manifest);
CacheManifest manifest_from_json(std::string_view json);

/// Serializes to the byte layout above. f32 payloads are rounded to nearest.
std::string encode_cache(const ActivationCacheFile& file);

/// Parses and validates; throws CacheFormatError on the first finding.
ActivationCacheFile decode_cache(std::string_view bytes);

/// Writes atomically (temp file, then rename). Throws ValidationError when the
/// manifest disagrees with the set, IoError on filesystem failure.
void write_cache(const std::filesystem::path& path, const ActivationSetd& set,
                 const CacheManifest& manifest);

ActivationCacheFile read_cache(const std::filesystem::path& path);

/// Checks every invariant of an in-memory file and lists each failure.
ValidationReport validate_cache(const ActivationCacheFile& file);
/// Same, starting from raw bytes, so that header and length faults are reported too.
ValidationReport validate_cache_bytes(std::string_view bytes);
/// Reads `path` and validates it. Throws IoError if the file cannot be read.
ValidationReport validate_cache_file(const std::filesystem::path& path);

/// Relative paths are resolved against $ACTCACHE_DIR when it is set.
std::filesystem::path resolve_cache_path(const std::filesystem::path& path);

/// Stores a mechanism as a cache file: conceptors as a d×d payload, steering
/// vectors as 1×d. Mean-centered kinds carry μ_train in the manifest.
void write_mechanism(const std::filesystem::path& path, const SteeringMechanismd& mechanism,
                     CacheManifest base);
SteeringMechanismd read_mechanism(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace csteer
