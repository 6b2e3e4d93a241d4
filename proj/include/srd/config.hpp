#pragma once

#include <map>
#include <string>
#include <vector>

#include "srd/trainer.hpp"

namespace srd {

// Flat key=value lines under [section] headers; '#' starts a comment. Keys
// are addressed as "section.key"; later duplicates win.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Applies one "model.*" or "train.*" entry; unknown keys and unparseable
// values raise std::invalid_argument naming the key.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);

void apply_config(TrainConfig& config, const std::map<std::string, std::string>& entries);

// Echo that parses back to the same configuration via apply_config.
std::string config_echo(const TrainConfig& config);

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace srd
