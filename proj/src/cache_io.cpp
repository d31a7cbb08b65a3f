#include "csteer/cache_io.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "json.hpp"

namespace csteer {

namespace {

using nlohmann::json;

template <typename UInt>
void put_le(std::string& out, UInt value) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename UInt>
UInt get_le(std::string_view bytes, std::size_t offset) {
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

json mechanism_to_json(const MechanismInfo& m) {
  json j;
  j["kind"] = to_string(m.kind);
  if (m.alpha) j["alpha"] = *m.alpha;
  if (m.beta) j["beta"] = *m.beta;
  j["mean_centered"] = m.mean_centered;
  if (!m.mu_train.empty()) {
    j["mu_train"] = m.mu_train;
    j["mu_source_count"] = m.mu_source_count;
  }
  return j;
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw CacheFormatError("manifest", std::string("manifest is missing \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw CacheFormatError("manifest", std::string("manifest field \"") + key + "\": " + e.what());
  }
}

MechanismInfo mechanism_from_json(const json& j) {
  MechanismInfo m;
  const auto kind = parse_mechanism_kind(required<std::string>(j, "kind"));
  if (!kind || *kind == MechanismKind::none) {
    throw CacheFormatError("manifest", "unknown mechanism kind in manifest");
  }
  m.kind = *kind;
  if (j.contains("alpha")) m.alpha = required<double>(j, "alpha");
  if (j.contains("beta")) m.beta = required<double>(j, "beta");
  m.mean_centered = required<bool>(j, "mean_centered");
  if (j.contains("mu_train")) {
    m.mu_train = required<std::vector<double>>(j, "mu_train");
    m.mu_source_count = required<Index>(j, "mu_source_count");
  }
  return m;
}

/// Header and manifest of a byte buffer, or the first structural finding.
struct ParsedHeader {
  std::optional<CacheManifest> manifest;
  std::size_t payload_offset = 0;
  std::optional<Finding> fault;
};

ParsedHeader parse_header(std::string_view bytes) {
  ParsedHeader out;
  if (bytes.size() < kCacheHeaderBytes) {
    out.fault = Finding{"truncated", "file has " + std::to_string(bytes.size()) +
                                         " bytes, shorter than the 16-byte header"};
    return out;
  }
  if (bytes.substr(0, kCacheMagicPrefix.size()) != kCacheMagicPrefix) {
    out.fault = Finding{"bad magic", "file does not start with ACTCACH"};
    return out;
  }
  if (bytes[7] != kCacheFormatVersion) {
    out.fault = Finding{"unsupported version",
                        std::string("format version '") + bytes[7] + "' is not supported (expected '1')"};
    return out;
  }
  const auto manifest_len = get_le<std::uint64_t>(bytes, 8);
  if (manifest_len > bytes.size() - kCacheHeaderBytes) {
    out.fault = Finding{"length mismatch", "declared manifest length " + std::to_string(manifest_len) +
                                               " exceeds the file size"};
    return out;
  }
  try {
    out.manifest = manifest_from_json(bytes.substr(kCacheHeaderBytes, manifest_len));
  } catch (const CacheFormatError& e) {
    out.fault = Finding{e.code(), e.what()};
    return out;
  }
  out.payload_offset = kCacheHeaderBytes + manifest_len;
  return out;
}

Matrixd decode_payload(std::string_view bytes, const CacheManifest& m) {
  Matrixd payload(m.n_prompts, m.dim);
  const std::size_t elem = element_size(m.dtype);
  std::size_t offset = 0;
  for (Index i = 0; i < m.n_prompts; ++i) {
    for (Index j = 0; j < m.dim; ++j, offset += elem) {
      if (m.dtype == DType::f64) {
        payload(i, j) = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
      } else {
        payload(i, j) = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset)));
      }
    }
  }
  return payload;
}

void check_manifest_fields(const CacheManifest& m, std::vector<Finding>& findings) {
  if (m.n_prompts < 1) findings.push_back({"manifest", "n_prompts must be positive"});
  if (m.n_examples_per_prompt < 1) findings.push_back({"manifest", "n_examples_per_prompt must be positive"});
  if (m.dim < 1) findings.push_back({"manifest", "dim must be positive"});
  if (m.mechanism && !m.mechanism->mu_train.empty()) {
    if (static_cast<Index>(m.mechanism->mu_train.size()) != m.dim) {
      findings.push_back({"dim mismatch", "mu_train has " + std::to_string(m.mechanism->mu_train.size()) +
                                              " entries, dim is " + std::to_string(m.dim)});
    }
  }
}

}  // namespace

const char* to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

std::optional<DType> parse_dtype(std::string_view tag) {
  if (tag == "f32") return DType::f32;
  if (tag == "f64") return DType::f64;
  return std::nullopt;
}

std::size_t element_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

bool ValidationReport::has(std::string_view code) const {
  for (const auto& f : findings)
    if (f.code == code) return true;
  return false;
}

std::string manifest_to_json(const CacheManifest& m) {
  json j;
  j["model_id"] = m.model_id;
  j["layer_index"] = m.layer_index;
  j["task_label"] = m.task_label;
  j["n_prompts"] = m.n_prompts;
  j["n_examples_per_prompt"] = m.n_examples_per_prompt;
  j["dim"] = m.dim;
  j["dtype"] = to_string(m.dtype);
  j["seed"] = m.seed;
  j["created_unix_ms"] = m.created_unix_ms;
  if (m.mechanism) j["mechanism"] = mechanism_to_json(*m.mechanism);
  return j.dump();
}

CacheManifest manifest_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CacheFormatError("manifest", std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CacheFormatError("manifest", "manifest is not a JSON object");
  CacheManifest m;
  m.model_id = required<std::string>(j, "model_id");
  m.layer_index = required<std::uint64_t>(j, "layer_index");
  m.task_label = required<std::string>(j, "task_label");
  m.n_prompts = required<Index>(j, "n_prompts");
  m.n_examples_per_prompt = required<Index>(j, "n_examples_per_prompt");
  m.dim = required<Index>(j, "dim");
  const auto dtype = parse_dtype(required<std::string>(j, "dtype"));
  if (!dtype) throw CacheFormatError("manifest", "dtype must be \"f32\" or \"f64\"");
  m.dtype = *dtype;
  m.seed = required<std::int64_t>(j, "seed");
  m.created_unix_ms = required<std::int64_t>(j, "created_unix_ms");
  if (j.contains("mechanism")) m.mechanism = mechanism_from_json(j.at("mechanism"));
  return m;
}

ValidationReport validate_cache(const ActivationCacheFile& file) {
  ValidationReport report;
  const auto& m = file.manifest;
  check_manifest_fields(m, report.findings);
  if (m.n_prompts != file.payload.rows()) {
    report.findings.push_back({"row count mismatch", "manifest n_prompts " + std::to_string(m.n_prompts) +
                                                         " but payload has " +
                                                         std::to_string(file.payload.rows()) + " rows"});
  }
  if (m.dim != file.payload.cols()) {
    report.findings.push_back({"dim mismatch", "manifest dim " + std::to_string(m.dim) + " but payload has " +
                                                   std::to_string(file.payload.cols()) + " columns"});
  }
  for (Index i = 0; i < file.payload.rows(); ++i) {
    for (Index j = 0; j < file.payload.cols(); ++j) {
      if (!std::isfinite(file.payload(i, j))) {
        report.findings.push_back({"non-finite", "non-finite payload value at row " + std::to_string(i) +
                                                     ", column " + std::to_string(j)});
        return report;
      }
    }
  }
  return report;
}

ValidationReport validate_cache_bytes(std::string_view bytes) {
  ValidationReport report;
  const auto header = parse_header(bytes);
  if (header.fault) {
    report.findings.push_back(*header.fault);
    return report;
  }
  const auto& m = *header.manifest;
  check_manifest_fields(m, report.findings);
  if (!report.ok()) return report;
  const std::size_t actual = bytes.size() - header.payload_offset;
  const auto rows = static_cast<std::size_t>(m.n_prompts);
  const auto row_bytes = static_cast<std::size_t>(m.dim) * element_size(m.dtype);
  if (rows > actual / row_bytes + 1) {
    report.findings.push_back({"length mismatch", "manifest declares " + std::to_string(rows) +
                                                      " rows, far more than the file holds"});
    return report;
  }
  const std::size_t expected = rows * row_bytes;
  if (expected != actual) {
    report.findings.push_back({"length mismatch", "payload should be " + std::to_string(expected) +
                                                      " bytes, file holds " + std::to_string(actual)});
    return report;
  }
  ActivationCacheFile file{m, decode_payload(bytes.substr(header.payload_offset), m)};
  return validate_cache(file);
}

std::string encode_cache(const ActivationCacheFile& file) {
  const auto report = validate_cache(file);
  if (!report.ok()) {
    throw CacheFormatError(report.findings.front().code, report.findings.front().message);
  }
  const std::string manifest = manifest_to_json(file.manifest);
  std::string out;
  out.reserve(kCacheHeaderBytes + manifest.size() +
              static_cast<std::size_t>(file.payload.size()) * element_size(file.manifest.dtype));
  out.append(kCacheMagicPrefix);
  out.push_back(kCacheFormatVersion);
  put_le<std::uint64_t>(out, manifest.size());
  out.append(manifest);
  for (Index i = 0; i < file.payload.rows(); ++i) {
    for (Index j = 0; j < file.payload.cols(); ++j) {
      const double v = file.payload(i, j);
      if (file.manifest.dtype == DType::f64) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      } else {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) {
          throw ValidationError("value at row " + std::to_string(i) + ", column " + std::to_string(j) +
                                " overflows f32");
        }
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
      }
    }
  }
  return out;
}

ActivationCacheFile decode_cache(std::string_view bytes) {
  const auto report = validate_cache_bytes(bytes);
  if (!report.ok()) {
    throw CacheFormatError(report.findings.front().code, report.findings.front().message);
  }
  const auto header = parse_header(bytes);
  return ActivationCacheFile{*header.manifest, decode_payload(bytes.substr(header.payload_offset),
                                                              *header.manifest)};
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(buffer).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_cache(const std::filesystem::path& path, const ActivationSetd& set, const CacheManifest& manifest) {
  if (manifest.n_prompts != set.n() || manifest.dim != set.dim()) {
    throw ValidationError("manifest declares " + std::to_string(manifest.n_prompts) + "x" +
                          std::to_string(manifest.dim) + " but the activation set is " +
                          std::to_string(set.n()) + "x" + std::to_string(set.dim()));
  }
  write_file_atomic(path, encode_cache(ActivationCacheFile{manifest, set.data()}));
}

ActivationCacheFile read_cache(const std::filesystem::path& path) {
  return decode_cache(read_file_bytes(path));
}

ValidationReport validate_cache_file(const std::filesystem::path& path) {
  return validate_cache_bytes(read_file_bytes(path));
}

std::filesystem::path resolve_cache_path(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("ACTCACHE_DIR"); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / path;
  }
  return path;
}

void write_mechanism(const std::filesystem::path& path, const SteeringMechanismd& mechanism, CacheManifest base) {
  MechanismInfo info;
  info.kind = mechanism.kind();
  info.beta = mechanism.beta();
  Matrixd payload;
  switch (mechanism.kind()) {
    case MechanismKind::none:
      throw UsageError("mechanism 'none' has no payload to store");
    case MechanismKind::additive:
    case MechanismKind::additive_mc: {
      const auto& v = std::get<SteeringVectord>(mechanism.payload());
      payload = v.vector().transpose();
      info.mean_centered = v.mean_centered();
      if (base.task_label.empty()) base.task_label = v.task_label();
      break;
    }
    case MechanismKind::conceptor:
    case MechanismKind::conceptor_mc: {
      const auto& c = std::get<Conceptord>(mechanism.payload());
      payload = c.matrix();
      info.mean_centered = c.mean_centered();
      if (c.aperture()) info.alpha = c.aperture()->value();
      break;
    }
  }
  if (mechanism.context()) {
    const auto& mu = mechanism.context()->mu_train();
    info.mu_train.assign(mu.data(), mu.data() + mu.size());
    info.mu_source_count = mechanism.context()->source_count();
  }
  base.n_prompts = payload.rows();
  base.dim = payload.cols();
  base.dtype = DType::f64;
  base.mechanism = info;
  write_file_atomic(path, encode_cache(ActivationCacheFile{base, payload}));
}

SteeringMechanismd read_mechanism(const std::filesystem::path& path) {
  const auto file = read_cache(path);
  const auto& m = file.manifest;
  if (!m.mechanism) throw UsageError(path.string() + " does not hold a steering mechanism");
  const auto& info = *m.mechanism;
  if (!info.beta) throw CacheFormatError("manifest", "mechanism file has no beta");
  std::optional<MeanCenteringContextd> ctx;
  if (!info.mu_train.empty()) {
    ctx.emplace(Eigen::Map<const Vectord>(info.mu_train.data(), static_cast<Index>(info.mu_train.size())),
                info.mu_source_count);
  }
  if (uses_context(info.kind) && !ctx) {
    throw CacheFormatError("manifest", "mean-centered mechanism file has no mu_train");
  }
  switch (info.kind) {
    case MechanismKind::additive:
    case MechanismKind::additive_mc: {
      if (m.n_prompts != 1) throw CacheFormatError("row count mismatch", "steering vector file must have one row");
      SteeringVectord v(file.payload.row(0).transpose(), info.mean_centered, m.task_label);
      if (info.kind == MechanismKind::additive) return SteeringMechanismd::additive(std::move(v), *info.beta);
      return SteeringMechanismd::additive_mc(std::move(v), *ctx, *info.beta);
    }
    case MechanismKind::conceptor:
    case MechanismKind::conceptor_mc: {
      if (m.n_prompts != m.dim) throw CacheFormatError("row count mismatch", "conceptor file must be square");
      std::optional<Aperture> alpha;
      if (info.alpha) alpha.emplace(*info.alpha);
      Provenance p{info.mean_centered ? ConceptorOrigin::mean_centered : ConceptorOrigin::correlation,
                   info.mean_centered, {}};
      auto c = Conceptord::from_matrix(file.payload, std::move(p), alpha);
      if (info.kind == MechanismKind::conceptor) return SteeringMechanismd::conceptor(std::move(c), *info.beta);
      return SteeringMechanismd::conceptor_mc(std::move(c), *ctx, *info.beta);
    }
    case MechanismKind::none:
      break;
  }
  throw CacheFormatError("manifest", "unsupported mechanism kind");
}

}  // namespace csteer
