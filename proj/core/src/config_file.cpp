#include "pul/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "pul/errors.hpp"

namespace pul {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidInput("config key '" + key + "': expected a boolean, got '" + value + "'");
}

// Applies every recognized key, then rejects leftovers.
class KeyConsumer {
 public:
  explicit KeyConsumer(const ConfigFile& file) : file_(file) {}

  void integer(const std::string& key, int& out) {
    if (auto v = get(key)) out = static_cast<int>(to_int(key, *v));
  }
  void integer(const std::string& key, std::uint64_t& out) {
    if (auto v = get(key)) out = static_cast<std::uint64_t>(to_int(key, *v));
  }
  void number(const std::string& key, double& out) {
    if (auto v = get(key)) out = to_double(key, *v);
  }
  void boolean(const std::string& key, bool& out) {
    if (auto v = get(key)) out = to_bool(key, *v);
  }

  void finish() const {
    for (const auto& [key, value] : file_.values)
      if (!seen_.count(key)) throw InvalidInput("unknown config key '" + key + "'");
  }

 private:
  std::optional<std::string> get(const std::string& key) {
    seen_.insert(key);
    const auto it = file_.values.find(key);
    if (it == file_.values.end()) return std::nullopt;
    return it->second;
  }

  const ConfigFile& file_;
  std::set<std::string> seen_;
};

}  // namespace

ConfigFile parse_config_text(const std::string& text) {
  ConfigFile file;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw InvalidInput("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidInput("config line " + std::to_string(line_no) + ": empty key or value");
    file.values[section.empty() ? key : section + "." + key] = value;
  }
  return file;
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

PulConfig pul_config_from(const ConfigFile& file, const PulConfig& defaults) {
  PulConfig config = defaults;
  KeyConsumer keys(file);
  keys.integer("pul.k", config.k);
  keys.number("pul.lambda", config.lambda);
  keys.integer("pul.max_iters", config.max_pul_iters);
  keys.integer("pul.kmeans_max_iters", config.kmeans_max_iters);
  keys.integer("pul.seed", config.seed);
  keys.boolean("pul.fine_tune_from_original", config.fine_tune_from_original);
  keys.boolean("pul.selection_enabled", config.selection_enabled);
  keys.number("sgd.learning_rate", config.sgd.learning_rate);
  keys.number("sgd.momentum", config.sgd.momentum);
  keys.integer("sgd.epochs_per_iter", config.sgd.epochs_per_iter);
  keys.integer("sgd.batch_size", config.sgd.batch_size);
  keys.integer("sgd.init_epochs", config.sgd.init_epochs);
  keys.integer("convergence.patience", config.convergence.patience);
  keys.number("convergence.rel_tol", config.convergence.rel_tol);
  keys.integer("embed.hidden_dim", config.embed.hidden_dim);
  keys.integer("embed.embed_dim", config.embed.embed_dim);
  keys.boolean("embed.linear", config.embed.linear);
  keys.finish();
  return config;
}

SyntheticSpec synthetic_spec_from(const ConfigFile& file, const SyntheticSpec& defaults) {
  SyntheticSpec spec = defaults;
  KeyConsumer keys(file);
  auto domain = [&](const std::string& section, DomainParams& d) {
    keys.integer(section + ".num_ids", d.num_ids);
    keys.integer(section + ".samples_per_id", d.samples_per_id);
    keys.integer(section + ".dim", d.dim);
    keys.number(section + ".sigma_within", d.sigma_within);
    keys.number(section + ".sigma_between", d.sigma_between);
  };
  domain("source", spec.source);
  domain("target", spec.target);
  keys.boolean("shift.rotate", spec.shift.rotate);
  keys.integer("shift.rotation_seed", spec.shift.rotation_seed);
  keys.number("shift.translation_scale", spec.shift.translation_scale);
  keys.number("shift.sigma_extra", spec.shift.sigma_extra);
  keys.integer("synthetic.cameras_per_id", spec.cameras_per_id);
  keys.integer("synthetic.query_per_id", spec.query_per_id);
  keys.integer("synthetic.gallery_per_id", spec.gallery_per_id);
  keys.integer("synthetic.semi_label_ids", spec.semi_label_ids);
  keys.boolean("synthetic.share_source_prototypes", spec.share_source_prototypes);
  keys.integer("synthetic.seed", spec.seed);
  keys.finish();
  return spec;
}

}  // namespace pul
