#include "csteer/config.hpp"

#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

namespace csteer {

namespace {

class TableReader {
 public:
  TableReader(const toml::table& table, std::string context) : table_(table), context_(std::move(context)) {}

  template <typename T>
  std::optional<T> scalar(std::string_view key) {
    const auto* node = take(key);
    if (node == nullptr) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) return *v;
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (node->is_integer()) return node->as_integer()->get();
    }
    throw ValidationError(where(key) + " has the wrong type");
  }

  std::optional<std::int64_t> non_negative(std::string_view key) {
    auto v = scalar<std::int64_t>(key);
    if (v && *v < 0) throw ValidationError(where(key) + " must be non-negative");
    return v;
  }

  template <typename T>
  std::optional<std::vector<T>> list(std::string_view key) {
    const auto* node = take(key);
    if (node == nullptr) return std::nullopt;
    const auto* array = node->as_array();
    if (array == nullptr) throw ValidationError(where(key) + " must be an array");
    std::vector<T> out;
    for (const auto& item : *array) {
      if constexpr (std::is_same_v<T, double>) {
        auto v = item.value<double>();
        if (!v) throw ValidationError(where(key) + " must contain numbers");
        out.push_back(*v);
      } else if constexpr (std::is_same_v<T, std::string>) {
        auto v = item.value<std::string>();
        if (!v) throw ValidationError(where(key) + " must contain strings");
        out.push_back(*v);
      } else {
        if (!item.is_integer() || item.as_integer()->get() < 0) {
          throw ValidationError(where(key) + " must contain non-negative integers");
        }
        out.push_back(static_cast<T>(item.as_integer()->get()));
      }
    }
    return out;
  }

  const toml::table* table(std::string_view key) {
    const auto* node = take(key);
    if (node == nullptr) return nullptr;
    if (!node->is_table()) throw ValidationError(where(key) + " must be a table");
    return node->as_table();
  }

  void finish() const {
    for (const auto& [key, node] : table_) {
      if (!seen_.contains(std::string(key.str()))) throw ValidationError("unknown key " + where(key.str()));
    }
  }

 private:
  const toml::node* take(std::string_view key) {
    seen_.insert(std::string(key));
    return table_.get(key);
  }
  std::string where(std::string_view key) const {
    return context_.empty() ? "\"" + std::string(key) + "\"" : "\"" + context_ + "." + std::string(key) + "\"";
  }

  const toml::table& table_;
  std::string context_;
  std::set<std::string> seen_;
};

SyntheticSourceConfig parse_synthetic(TableReader& r) {
  SyntheticSourceConfig s;
  if (auto v = r.non_negative("dim")) s.spec.dim = *v;
  if (auto v = r.non_negative("subspace_rank")) s.spec.subspace_rank = *v;
  if (auto v = r.scalar<double>("centroid_norm")) s.spec.centroid_norm = *v;
  if (auto v = r.scalar<double>("within_task_std")) s.spec.within_task_std = *v;
  if (auto v = r.scalar<double>("noise_std")) s.spec.noise_std = *v;
  if (auto v = r.scalar<double>("shared_offset_norm")) s.spec.shared_offset_norm = *v;
  if (auto v = r.non_negative("seed")) s.spec.seed = static_cast<std::uint64_t>(*v);
  if (auto v = r.non_negative("n_tasks")) s.n_tasks = static_cast<std::size_t>(*v);
  if (auto v = r.non_negative("n_train")) s.n_train = *v;
  if (auto v = r.non_negative("n_baseline")) s.n_baseline = *v;
  return s;
}

CacheSourceConfig parse_cache(TableReader& r) {
  CacheSourceConfig c;
  if (auto files = r.list<std::string>("files")) c.files.assign(files->begin(), files->end());
  if (auto dir = r.scalar<std::string>("dir")) c.files.emplace_back(*dir);
  if (c.files.empty()) throw ValidationError("cache source needs \"files\" or \"dir\"");
  if (auto v = r.scalar<std::string>("baseline_task")) c.baseline_task = *v;
  if (auto v = r.scalar<double>("train_fraction")) c.train_fraction = *v;
  return c;
}

}  // namespace

ExperimentConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(msg.str());
  }

  ExperimentConfig config;
  TableReader r(root, "");
  if (const auto* source = r.table("source")) {
    TableReader s(*source, "source");
    const auto kind = s.scalar<std::string>("kind").value_or("synthetic");
    if (kind == "synthetic") {
      config.source = parse_synthetic(s);
    } else if (kind == "cache") {
      config.source = parse_cache(s);
    } else {
      throw ValidationError("source.kind must be \"synthetic\" or \"cache\", got \"" + kind + "\"");
    }
    s.finish();
  }
  if (auto names = r.list<std::string>("mechanisms")) {
    config.mechanisms.clear();
    for (const auto& name : *names) {
      const auto kind = parse_mechanism_kind(name);
      if (!kind) throw ValidationError("unknown mechanism \"" + name + "\"");
      config.mechanisms.push_back(*kind);
    }
  }
  if (auto v = r.list<std::uint64_t>("layers")) config.layers = *v;
  if (auto v = r.list<double>("alpha_grid")) config.alpha_grid = *v;
  if (auto v = r.list<double>("beta_c_grid")) config.beta_c_grid = *v;
  if (auto v = r.list<double>("beta_add_grid")) config.beta_add_grid = *v;
  if (auto v = r.non_negative("n_test")) config.n_test = *v;
  if (auto v = r.non_negative("n_seeds")) config.n_seeds = static_cast<std::size_t>(*v);
  if (auto v = r.non_negative("master_seed")) config.master_seed = static_cast<std::uint64_t>(*v);
  if (auto v = r.scalar<std::string>("source_task")) config.source_task = *v;
  if (auto v = r.scalar<std::string>("target_task")) config.target_task = *v;
  if (auto v = r.scalar<std::string>("output_dir")) config.output_dir = *v;
  r.finish();
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file_bytes(path));
}

}  // namespace csteer
