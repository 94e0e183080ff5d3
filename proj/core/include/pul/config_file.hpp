#pragma once

#include <map>
#include <string>

#include "pul/synthetic.hpp"
#include "pul/types.hpp"

namespace pul {

// INI-style "key = value" sections. Keys are stored as "section.key";
// top-of-file keys have no section prefix. '#' and ';' start comments.
struct ConfigFile {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
};

ConfigFile parse_config_text(const std::string& text);
ConfigFile parse_config_file(const std::string& path);

// Overlay file values onto defaults. Unknown keys are rejected.
PulConfig pul_config_from(const ConfigFile& file, const PulConfig& defaults = {});
SyntheticSpec synthetic_spec_from(const ConfigFile& file, const SyntheticSpec& defaults = {});

}  // namespace pul
