#include "srd/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "srd/eval.hpp"

namespace srd {
namespace {

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

std::uint64_t parse_uint(const std::string& value, const std::string& key) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected integer, got '" + value + "'");
  }
  if (used != value.size() || value.empty() || value[0] == '-')
    throw std::invalid_argument(key + ": expected integer, got '" + value + "'");
  return out;
}

std::size_t parse_size(const std::string& value, const std::string& key) {
  return static_cast<std::size_t>(parse_uint(value, key));
}

double parse_real(const std::string& value, const std::string& key) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected number, got '" + value + "'");
  }
  if (used != value.size())
    throw std::invalid_argument(key + ": expected number, got '" + value + "'");
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(trim(current));
  return parts;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream stream(text);
  std::string line;
  std::string section;
  std::size_t line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw std::invalid_argument("config line " + std::to_string(line_number) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_number) +
                                  ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_number) + ": empty key");
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(line_number) +
                                  ": key outside any section");
    entries[section + "." + key] = value;
  }
  return entries;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const std::string& part : split_commas(text)) out.push_back(parse_size(part, what));
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : split_commas(text)) out.push_back(parse_real(part, what));
  return out;
}

void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value) {
  if (key == "model.d_graph") {
    config.dims.d_graph = parse_size(value, key);
  } else if (key == "model.gcn_layers") {
    config.dims.gcn_layers = parse_size(value, key);
  } else if (key == "model.d_model") {
    config.dims.d_model = parse_size(value, key);
  } else if (key == "model.heads") {
    config.dims.heads = parse_size(value, key);
  } else if (key == "model.seq_len") {
    config.dims.seq_len = parse_size(value, key);
  } else if (key == "model.conv_windows") {
    config.dims.conv_windows = parse_size_list(value, key);
  } else if (key == "model.conv_maps") {
    config.dims.conv_maps = parse_size(value, key);
  } else if (key == "model.d_proj") {
    config.dims.d_proj = parse_size(value, key);
  } else if (key == "model.clusters") {
    config.dims.clusters = parse_size(value, key);
  } else if (key == "train.mode") {
    config.mode = parse_mode(value);
  } else if (key == "train.lambda") {
    config.lambda = parse_real(value, key);
  } else if (key == "train.tau") {
    config.tau = parse_real(value, key);
  } else if (key == "train.batch_size") {
    config.batch_size = parse_size(value, key);
  } else if (key == "train.epochs") {
    config.epochs = parse_size(value, key);
  } else if (key == "train.lr_max") {
    config.lr_max = parse_real(value, key);
  } else if (key == "train.lr_min") {
    config.lr_min = parse_real(value, key);
  } else if (key == "train.folds") {
    config.folds = parse_size(value, key);
  } else if (key == "train.patience") {
    config.patience = parse_size(value, key);
  } else if (key == "train.dropout") {
    config.dropout = parse_real(value, key);
  } else if (key == "train.seed") {
    config.seed = parse_uint(value, key);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

void apply_config(TrainConfig& config, const std::map<std::string, std::string>& entries) {
  for (const auto& [key, value] : entries) apply_config_entry(config, key, value);
}

std::string config_echo(const TrainConfig& config) {
  std::ostringstream out;
  out << "[model]\n";
  out << "d_graph=" << config.dims.d_graph << "\n";
  out << "gcn_layers=" << config.dims.gcn_layers << "\n";
  out << "d_model=" << config.dims.d_model << "\n";
  out << "heads=" << config.dims.heads << "\n";
  out << "seq_len=" << config.dims.seq_len << "\n";
  out << "conv_windows=";
  for (std::size_t i = 0; i < config.dims.conv_windows.size(); ++i) {
    if (i > 0) out << ",";
    out << config.dims.conv_windows[i];
  }
  out << "\n";
  out << "conv_maps=" << config.dims.conv_maps << "\n";
  out << "d_proj=" << config.dims.d_proj << "\n";
  out << "clusters=" << config.dims.clusters << "\n";
  out << "[train]\n";
  out << "mode=" << mode_name(config.mode) << "\n";
  out << "lambda=" << format_double(config.lambda) << "\n";
  out << "tau=" << format_double(config.tau) << "\n";
  out << "batch_size=" << config.batch_size << "\n";
  out << "epochs=" << config.epochs << "\n";
  out << "lr_max=" << format_double(config.lr_max) << "\n";
  out << "lr_min=" << format_double(config.lr_min) << "\n";
  out << "folds=" << config.folds << "\n";
  out << "patience=" << config.patience << "\n";
  out << "dropout=" << format_double(config.dropout) << "\n";
  out << "seed=" << config.seed << "\n";
  return out.str();
}

}  // namespace srd
